#include "mrcg/precond.hpp"

#include <charconv>
#include <cmath>

#include "mrcg/error.hpp"
#include "mrcg/kernels.hpp"

namespace mrcg {

DeflatedOperator::DeflatedOperator(const SparseSymMatrix& a, const DeflationBasis& basis)
    : a_(a), basis_(basis), abs_lambda_(basis.k()) {
  if (basis.k() > 0 && basis.n() != a.n())
    throw DimensionError("deflation basis has " + std::to_string(basis.n()) +
                         " rows, matrix has " + std::to_string(a.n()));
  for (std::size_t i = 0; i < basis.k(); ++i) abs_lambda_[i] = 2.0 * std::abs(basis.lambda[i]);
}

void DeflatedOperator::apply(std::span<const double> u, std::span<double> y) const {
  a_.apply(u, y);
  const std::size_t k = basis_.k();
  if (k == 0) return;
  // V (2|Lambda| (V^T u)), accumulated onto A u.
  Vector c(k);
  kernels::gemv_t(a_.n(), k, basis_.vectors.data(), u, c);
  for (std::size_t i = 0; i < k; ++i) c[i] *= abs_lambda_[i];
  kernels::gemv_acc(a_.n(), k, basis_.vectors.data(), c, y);
}

Vector deflated_apply(const DeflatedOperator& op, std::span<const double> u) {
  if (u.size() != op.size()) throw DimensionError("deflated_apply: vector length mismatch");
  return op(u);
}

SmwInverse::SmwInverse(std::shared_ptr<const LinearOperator> inner,
                       const DeflationBasis& basis, std::string label)
    : inner_(std::move(inner)), basis_(basis), inv_lambda_(basis.k()), label_(std::move(label)) {
  if (!inner_) throw InvalidArgument("SmwInverse needs an inner solver");
  if (basis.k() > 0 && basis.n() != inner_->size())
    throw DimensionError("deflation basis and inner solver sizes differ");
  for (std::size_t i = 0; i < basis.k(); ++i) {
    if (basis.lambda[i] == 0.0) throw InvalidArgument("deflation basis has a zero eigenvalue");
    inv_lambda_[i] = -2.0 / basis.lambda[i];
  }
}

void SmwInverse::apply(std::span<const double> g, std::span<double> y) const {
  inner_->apply(g, y);
  const std::size_t k = basis_.k();
  if (k == 0) return;
  Vector c(k);
  kernels::gemv_t(size(), k, basis_.vectors.data(), g, c);
  for (std::size_t i = 0; i < k; ++i) c[i] *= inv_lambda_[i];
  kernels::gemv_acc(size(), k, basis_.vectors.data(), c, y);
}

Vector smw_apply(const SmwInverse& s, std::span<const double> g) {
  if (g.size() != s.size()) throw DimensionError("smw_apply: vector length mismatch");
  return s(g);
}

namespace {

double parse_tol(std::string_view text, const std::string& whole) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v >= 0.0) || !std::isfinite(v))
    throw SpecError("bad tolerance '" + std::string(text) + "' in preconditioner spec '" +
                    whole + "'");
  return v;
}

std::size_t parse_level(std::string_view text, const std::string& whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw SpecError("bad fill level '" + std::string(text) + "' in preconditioner spec '" +
                    whole + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t c = s.find(':', start);
    out.push_back(s.substr(start, c == std::string_view::npos ? c : c - start));
    if (c == std::string_view::npos) return out;
    start = c + 1;
  }
}

}  // namespace

PrecondSpec parse_precond_spec(const std::string& text) {
  PrecondSpec spec;
  spec.text = text;
  if (text.rfind("smw:", 0) == 0) {
    spec.kind = PrecondKind::Smw;
    spec.inner = std::make_unique<PrecondSpec>(parse_precond_spec(text.substr(4)));
    if (spec.inner->kind == PrecondKind::Smw || spec.inner->kind == PrecondKind::None)
      throw SpecError("smw needs a factorization as inner spec, got '" + text + "'");
    return spec;
  }
  const auto parts = split(text);
  const std::string_view head = parts.front();
  auto expect = [&](std::size_t count) {
    if (parts.size() != count)
      throw SpecError("preconditioner spec '" + text + "' expects " +
                      std::to_string(count - 1) + " parameter(s)");
  };
  if (head == "none") {
    expect(1);
  } else if (head == "ilu0") {
    expect(1);
    spec.kind = PrecondKind::Ilu0;
  } else if (head == "milu" || head == "ilut") {
    expect(2);
    spec.kind = head == "milu" ? PrecondKind::Milu : PrecondKind::Ilut;
    spec.drop_tol = parse_tol(parts[1], text);
  } else if (head == "ildlt" || head == "ildlt-mod") {
    expect(3);
    spec.kind = head == "ildlt" ? PrecondKind::Ildlt : PrecondKind::IldltModified;
    spec.fill_level = parse_level(parts[1], text);
    spec.drop_tol = parse_tol(parts[2], text);
  } else {
    throw SpecError("unknown preconditioner '" + text +
                    "' (expected none, ilu0, milu:<tol>, ilut:<tol>, ildlt:<level>:<tol>, "
                    "ildlt-mod:<level>:<tol> or smw:<inner>)");
  }
  return spec;
}

std::shared_ptr<const PreconditionerAction> build_preconditioner(
    const PrecondSpec& spec, const SparseSymMatrix& a, const DeflationBasis* basis,
    bool reorder, bool equilibrate) {
  switch (spec.kind) {
    case PrecondKind::None:
      return std::make_shared<IdentityOperator>(a.n());
    case PrecondKind::Ilu0:
      return std::make_shared<IluPreconditioner>(ilu0(a), spec.text);
    case PrecondKind::Milu:
      return std::make_shared<IluPreconditioner>(ilut(a, spec.drop_tol, true), spec.text);
    case PrecondKind::Ilut:
      return std::make_shared<IluPreconditioner>(ilut(a, spec.drop_tol, false), spec.text);
    case PrecondKind::Ildlt:
    case PrecondKind::IldltModified: {
      IldltOptions o;
      o.fill_level = spec.fill_level;
      o.drop_tol = spec.drop_tol;
      o.reorder = reorder;
      o.equilibrate = equilibrate;
      BlockLdlFactors f = ildlt(a, o);
      if (spec.kind == PrecondKind::IldltModified) f = modify_block_diagonal(f);
      return std::make_shared<LdlPreconditioner>(std::move(f), spec.text);
    }
    case PrecondKind::Smw: {
      if (basis == nullptr) throw SpecError("'" + spec.text + "' needs a deflation basis");
      auto inner = build_preconditioner(*spec.inner, a, nullptr, reorder, equilibrate);
      return std::make_shared<SmwInverse>(std::move(inner), *basis, spec.text);
    }
  }
  throw SpecError("unhandled preconditioner kind");
}

}  // namespace mrcg
