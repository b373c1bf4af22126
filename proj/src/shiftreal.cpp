#include "mrcg/shiftreal.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mrcg/error.hpp"
#include "mrcg/kernels.hpp"
#include "mrcg/matrix_market.hpp"
#include "mrcg/rng.hpp"

namespace mrcg {

namespace k = kernels;

namespace {

CsrMatrix zero_if_empty(const CsrMatrix& a, std::size_t n) {
  if (a.rows() == 0 && a.cols() == 0) return CsrMatrix::from_triplets(n, n, {});
  return a;
}

void require_square(const CsrMatrix& a, std::size_t n, const char* name) {
  if (a.rows() != n || a.cols() != n)
    throw DimensionError(std::string("QEP part ") + name + " is " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + ", expected " + std::to_string(n) +
                         "x" + std::to_string(n));
}

CsrMatrix symmetrized(const CsrMatrix& a, const char* name) {
  if (!a.is_symmetric(1e-12))
    throw InvalidArgument(std::string("QEP part ") + name + " is not symmetric");
  return add(0.5, a, 0.5, a.transpose());
}

}  // namespace

QepParts QepParts::validated() const {
  const std::size_t n = mass.rows();
  QepParts out;
  out.mass = mass;
  out.k_e = zero_if_empty(k_e, n);
  out.d_m = zero_if_empty(d_m, n);
  out.d_r = zero_if_empty(d_r, n);
  out.k_g = zero_if_empty(k_g, n);
  out.d_g = zero_if_empty(d_g, n);
  out.k_r = zero_if_empty(k_r, n);
  require_square(out.mass, n, "M");
  require_square(out.k_e, n, "K_E");
  require_square(out.d_m, n, "D_M");
  require_square(out.d_r, n, "D_R");
  require_square(out.k_g, n, "K_g");
  require_square(out.d_g, n, "D_G");
  require_square(out.k_r, n, "K_R");
  out.mass = symmetrized(out.mass, "M");
  out.k_e = symmetrized(out.k_e, "K_E");
  out.d_m = symmetrized(out.d_m, "D_M");
  out.d_r = symmetrized(out.d_r, "D_R");
  out.k_g = symmetrized(out.k_g, "K_g");
  if (!out.d_g.is_skew_symmetric(1e-12))
    throw InvalidArgument("QEP part D_G is not skew-symmetric");
  out.d_g = add(0.5, out.d_g, -0.5, out.d_g.transpose());
  return out;
}

QepMatrices assemble_qep(const QepParts& parts, const ShiftParams& p) {
  if (!(p.omega > 0.0) || !(p.omega_ref > 0.0))
    throw InvalidArgument("omega and omega_ref must be positive");
  const std::size_t n = parts.n();
  const CsrMatrix d_r = zero_if_empty(parts.d_r, n);
  const CsrMatrix d_g = zero_if_empty(parts.d_g, n);
  const CsrMatrix d_m = zero_if_empty(parts.d_m, n);
  const CsrMatrix k_r = zero_if_empty(parts.k_r, n);
  const CsrMatrix k_g = zero_if_empty(parts.k_g, n);
  const CsrMatrix k_e = zero_if_empty(parts.k_e, n);
  const double ratio = p.omega / p.omega_ref;
  QepMatrices q;
  q.d_omega = add(1.0, add(1.0, d_m, p.omega_ref / p.omega - 1.0, d_r), ratio, d_g);
  q.k_omega = add(1.0, add(1.0, k_e, 1.0, k_r), ratio * ratio - 1.0, k_g);
  return q;
}

Pencil companion_pencil(const CsrMatrix& mass, const CsrMatrix& d_omega,
                        const CsrMatrix& k_omega) {
  const std::size_t n = mass.rows();
  require_square(mass, n, "M");
  require_square(d_omega, n, "D");
  require_square(k_omega, n, "K");
  const CsrMatrix eye = CsrMatrix::identity(n);
  Pencil p;
  p.a = block2x2(n, CsrMatrix(), eye, scaled(-1.0, k_omega), scaled(-1.0, d_omega));
  p.b = block2x2(n, eye, CsrMatrix(), CsrMatrix(), mass);
  return p;
}

RealBlockSystem::RealBlockSystem(const Pencil& pencil, double gamma_r, double gamma_i) {
  if (gamma_i == 0.0) throw InvalidArgument("the shift needs a nonzero imaginary part");
  a_hat_ = add(gamma_r, pencil.b, -1.0, pencil.a);
  b_hat_ = scaled(gamma_i, pencil.b);
}

void RealBlockSystem::apply(std::span<const double> u, std::span<double> y) const {
  const std::size_t m = a_hat_.rows();
  const auto u1 = u.subspan(0, m), u2 = u.subspan(m, m);
  auto y1 = y.subspan(0, m), y2 = y.subspan(m, m);
  Vector t(m);
  b_hat_.apply(u1, y1);
  a_hat_.apply(u2, t);
  k::axpy(-1.0, t, y1);
  a_hat_.apply(u1, y2);
  b_hat_.apply(u2, t);
  k::axpy(1.0, t, y2);
}

Vector RealBlockSystem::rhs(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) throw DimensionError("rhs parts differ in length");
  Vector r(g.begin(), g.end());
  r.insert(r.end(), f.begin(), f.end());
  return r;
}

std::pair<Vector, Vector> RealBlockSystem::unknowns(std::span<const double> u) {
  const std::size_t m = u.size() / 2;
  Vector x(u.begin(), u.begin() + static_cast<long>(m));
  Vector y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = -u[m + i];
  return {std::move(x), std::move(y)};
}

RealBlockSystem real_block_system(const Pencil& pencil, double gamma_r, double gamma_i) {
  return RealBlockSystem(pencil, gamma_r, gamma_i);
}

SparseSymMatrix inner_matrix(const CsrMatrix& k_e, const CsrMatrix& mass, double gamma_abs2) {
  return SparseSymMatrix(add(1.0, k_e, -gamma_abs2, mass));
}

// ---------------------------------------------------------------------------

SchurSolver::SchurSolver(const CsrMatrix& k_e, const CsrMatrix& mass, double gamma_r,
                         double gamma_i, std::shared_ptr<const LinearOperator> inner_inverse,
                         SchurConfig cfg)
    : k_e_(k_e),
      mass_(mass),
      gamma_r_(gamma_r),
      gamma_i_(gamma_i),
      c_(gamma_i + gamma_r * gamma_r / gamma_i),
      e_(2.0 * gamma_r / gamma_i),
      inner_(std::move(inner_inverse)),
      cfg_(cfg) {
  if (gamma_i == 0.0) throw InvalidArgument("the shift needs a nonzero imaginary part");
  if (!inner_ || inner_->size() != mass.rows())
    throw DimensionError("Schur inner solver size differs from the mass matrix");
}

void SchurSolver::apply_s2(std::span<const double> z, std::span<double> y) const {
  const std::size_t n = mass_.rows();
  const auto z1 = z.subspan(0, n), z2 = z.subspan(n, n);
  auto y1 = y.subspan(0, n), y2 = y.subspan(n, n);
  Vector mz1(n), kz1(n), mz2(n), kz2(n);
  mass_.apply(z1, mz1);
  k_e_.apply(z1, kz1);
  mass_.apply(z2, mz2);
  k_e_.apply(z2, kz2);
  for (std::size_t i = 0; i < n; ++i) {
    y1[i] = c_ * mz1[i] - kz1[i] / gamma_i_ - e_ * mz2[i];
    y2[i] = e_ * kz1[i] + c_ * mz2[i] - kz2[i] / gamma_i_;
  }
}

void SchurSolver::apply_t_inverse(std::span<const double> v, std::span<double> u) const {
  Vector rhs(v.begin(), v.end());
  k::scale(-gamma_i_, rhs);
  inner_->apply(rhs, u);
}

void SchurSolver::apply_s2_tilde_inverse(std::span<const double> v, std::span<double> y) const {
  const std::size_t n = mass_.rows();
  auto y1 = y.subspan(0, n), y2 = y.subspan(n, n);
  apply_t_inverse(v.subspan(0, n), y1);
  Vector rhs(n);
  k_e_.apply(y1, rhs);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = v[n + i] - e_ * rhs[i];
  apply_t_inverse(rhs, y2);
}

Vector SchurSolver::solve(std::span<const double> rhs) const {
  const std::size_t n = mass_.rows();
  if (rhs.size() != 2 * n) throw DimensionError("Schur rhs has the wrong length");
  Vector w(2 * n);
  mass_.apply(rhs.subspan(0, n), std::span<double>(w).subspan(0, n));
  std::copy(rhs.begin() + static_cast<long>(n), rhs.end(), w.begin() + static_cast<long>(n));

  const FunctionOperator s2(
      2 * n, [this](std::span<const double> z, std::span<double> y) { apply_s2(z, y); }, "S2");
  const FunctionOperator s2_tilde(
      2 * n,
      [this](std::span<const double> v, std::span<double> y) { apply_s2_tilde_inverse(v, y); },
      "S2~");
  SolveConfig cfg;
  cfg.rel_tol = cfg_.rel_tol;
  cfg.max_iters = cfg_.max_iters;
  cfg.restart = cfg_.restart;
  SolveResult r = gmres_restarted(s2, s2_tilde, w, cfg);
  ++solves_;
  gmres_iters_ += static_cast<std::size_t>(r.report.outer_iters);
  if (!r.report.converged) ++failures_;
  return std::move(r.x);
}

Vector schur_solve(const SchurSolver& s, std::span<const double> rhs) { return s.solve(rhs); }

BlockPreconditioner::BlockPreconditioner(const CsrMatrix& k_e, const CsrMatrix& mass,
                                         double gamma_r, double gamma_i, ShiftSolvers solvers,
                                         SchurConfig cfg)
    : k_e_(k_e),
      mass_(mass),
      gamma_r_(gamma_r),
      gamma_i_(gamma_i),
      solvers_(std::move(solvers)),
      schur_(k_e, mass, gamma_r, gamma_i, solvers_.inner_inverse, cfg) {
  if (!solvers_.mass_inverse || solvers_.mass_inverse->size() != mass.rows())
    throw DimensionError("mass solver size differs from the mass matrix");
}

void BlockPreconditioner::apply_a_tilde(std::span<const double> u, std::span<double> y) const {
  const std::size_t n = mass_.rows();
  const auto u1 = u.subspan(0, n), u2 = u.subspan(n, n);
  auto y1 = y.subspan(0, n), y2 = y.subspan(n, n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = gamma_r_ * u1[i] - u2[i];
  Vector t(n);
  k_e_.apply(u1, y2);
  mass_.apply(u2, t);
  k::axpy(gamma_r_, t, y2);
}

void BlockPreconditioner::apply_b_tilde_inverse(std::span<const double> u,
                                                std::span<double> y) const {
  const std::size_t n = mass_.rows();
  for (std::size_t i = 0; i < n; ++i) y[i] = u[i] / gamma_i_;
  auto y2 = y.subspan(n, n);
  solvers_.mass_inverse->apply(u.subspan(n, n), y2);
  k::scale(1.0 / gamma_i_, y2);
}

void BlockPreconditioner::apply(std::span<const double> r, std::span<double> t) const {
  const std::size_t m = 2 * mass_.rows();
  const auto r1 = r.subspan(0, m), r2 = r.subspan(m, m);
  auto t1 = t.subspan(0, m), t2 = t.subspan(m, m);
  // Lower solve: B~ q1 = r1, S q2 = r2 - A~ q1.
  Vector q1(m), w(m);
  apply_b_tilde_inverse(r1, q1);
  apply_a_tilde(q1, w);
  for (std::size_t i = 0; i < m; ++i) w[i] = r2[i] - w[i];
  const Vector q2 = schur_.solve(w);
  // Upper solve: t2 = q2, t1 = q1 + B~^-1 A~ q2.
  k::copy(q2, t2);
  Vector aq(m);
  apply_a_tilde(q2, aq);
  apply_b_tilde_inverse(aq, t1);
  k::axpy(1.0, q1, t1);
}

Vector block_precond_apply(const BlockPreconditioner& m, std::span<const double> rhs) {
  if (rhs.size() != m.size()) throw DimensionError("block preconditioner rhs length");
  return m(rhs);
}

std::shared_ptr<const LinearOperator> jacobi_cg_inverse(const SparseSymMatrix& m, double rel_tol,
                                                        std::size_t max_iters) {
  auto mat = std::make_shared<const SparseSymMatrix>(m);
  Vector inv_diag(m.n(), 1.0);
  for (std::size_t i = 0; i < m.n(); ++i) {
    const double d = m.at(i, i);
    if (d != 0.0) inv_diag[i] = 1.0 / d;
  }
  auto jacobi = std::make_shared<FunctionOperator>(
      m.n(),
      [inv_diag](std::span<const double> x, std::span<double> y) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = inv_diag[i] * x[i];
      },
      "jacobi");
  SolveConfig cfg;
  cfg.rel_tol = rel_tol;
  cfg.max_iters = max_iters;
  return std::make_shared<FunctionOperator>(
      m.n(),
      [mat, jacobi, cfg](std::span<const double> x, std::span<double> y) {
        const SolveResult r = pcg(*mat, *jacobi, x, cfg);
        k::copy(r.x, y);
      },
      "mass-cg");
}

MinresCgInverse::MinresCgInverse(std::shared_ptr<const SparseSymMatrix> a,
                                 std::shared_ptr<const DeflationBasis> basis,
                                 std::shared_ptr<const PreconditionerAction> precond,
                                 SolveConfig cfg)
    : a_(std::move(a)), basis_(std::move(basis)), precond_(std::move(precond)), cfg_(std::move(cfg)) {
  if (!a_ || !basis_ || !precond_) throw InvalidArgument("MinresCgInverse needs all parts");
}

void MinresCgInverse::apply(std::span<const double> x, std::span<double> y) const {
  const SolveResult r = minres_cg(*a_, *basis_, *precond_, x, cfg_);
  k::copy(r.x, y);
  ++calls_;
  outer_total_ += static_cast<std::size_t>(r.report.outer_iters);
  inner_total_ += r.report.inner_iters_total;
  if (!r.report.converged) ++failures_;
}

// ---------------------------------------------------------------------------

InnerSetupCache::InnerSetupCache(const CsrMatrix& k_e, const CsrMatrix& mass,
                                 std::string precond_spec, EigConfig eig)
    : k_e_(k_e), mass_(mass), precond_spec_(std::move(precond_spec)), eig_(std::move(eig)) {
  parse_precond_spec(precond_spec_);  // fail early on a bad spec
}

std::string InnerSetupCache::key(double gamma_abs2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.11e", gamma_abs2);
  return buf;
}

std::size_t InnerSetupCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::shared_ptr<const InnerSetup> InnerSetupCache::get(double gamma_abs2) {
  const std::string id = key(gamma_abs2);
  std::shared_ptr<std::mutex> build_lock;
  {
    std::unique_lock lock(mutex_);
    if (auto it = entries_.find(id); it != entries_.end()) return it->second;
    auto& slot = building_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    build_lock = slot;
  }
  std::lock_guard guard(*build_lock);
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(id); it != entries_.end()) return it->second;
  }
  // Built from the rounded key value so every shift in the bucket sees the
  // same matrix.
  const double s = std::stod(id);
  auto setup = std::make_shared<InnerSetup>();
  auto matrix = std::make_shared<SparseSymMatrix>(inner_matrix(k_e_, mass_, s));
  try {
    setup->basis = std::make_shared<DeflationBasis>(negative_eigenpairs(*matrix, eig_));
  } catch (const SingularMatrixError& e) {
    throw Error("inner matrix K_E - |gamma|^2 M at |gamma|^2 = " + id + " is " + e.what() +
                "; perturb the shift slightly");
  }
  setup->precond =
      build_preconditioner(parse_precond_spec(precond_spec_), *matrix, setup->basis.get());
  setup->matrix = std::move(matrix);
  std::unique_lock lock(mutex_);
  entries_[id] = setup;
  return setup;
}

ShiftSolveResult solve_shifted(const QepParts& raw, const ShiftParams& p,
                               std::span<const double> f, std::span<const double> g,
                               InnerSetupCache& cache, const ShiftSolveConfig& cfg) {
  const QepParts parts = raw.validated();
  const std::size_t n = parts.n();
  if (f.size() != 2 * n || g.size() != 2 * n)
    throw DimensionError("shifted rhs must have length 2n");
  const QepMatrices q = assemble_qep(parts, p);
  const Pencil pencil = companion_pencil(parts.mass, q.d_omega, q.k_omega);
  const RealBlockSystem sys(pencil, p.gamma_r, p.gamma_i);

  const auto setup = cache.get(p.gamma_abs2());
  auto inner = std::make_shared<MinresCgInverse>(setup->matrix, setup->basis, setup->precond,
                                                 cfg.inner);
  ShiftSolvers solvers;
  solvers.mass_inverse = jacobi_cg_inverse(SparseSymMatrix(parts.mass), cfg.mass_tol);
  solvers.inner_inverse = inner;
  const BlockPreconditioner prec(parts.k_e, parts.mass, p.gamma_r, p.gamma_i, solvers,
                                 cfg.schur);

  const Vector rhs = RealBlockSystem::rhs(f, g);
  SolveResult r = gmres_restarted(sys, prec, rhs, cfg.outer);
  ShiftSolveResult out;
  auto [x, y] = RealBlockSystem::unknowns(r.x);
  out.x = std::move(x);
  out.y = std::move(y);
  out.outer = std::move(r.report);
  out.inner_calls = inner->calls();
  out.inner_outer_total = inner->outer_total();
  out.inner_inner_total = inner->inner_total();
  out.schur_gmres_total = prec.schur().gmres_iterations();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::size_t, std::size_t>> grid_edges(std::size_t nx, std::size_t ny) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t v = j * nx + i;
      if (i + 1 < nx) e.emplace_back(v, v + 1);
      if (j + 1 < ny) e.emplace_back(v, v + nx);
    }
  return e;
}

CsrMatrix random_symmetric(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           double scale, std::mt19937_64& rng) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, scale * uniform_pm1(rng)});
  for (const auto& [a, b] : edges) {
    const double v = scale * uniform_pm1(rng);
    t.push_back({a, b, v});
    t.push_back({b, a, v});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace

QepParts synthetic_qep(const SyntheticQepOptions& opt) {
  const std::size_t nx = std::max<std::size_t>(1, opt.nx);
  const std::size_t ny = std::max<std::size_t>(1, opt.ny);
  const std::size_t n = nx * ny;
  const auto edges = grid_edges(nx, ny);
  std::mt19937_64 rng(opt.seed);

  std::vector<Triplet> kt, mt;
  const double kdiag = ny > 1 ? 4.0 : 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    kt.push_back({i, i, opt.stiffness * kdiag});
    mt.push_back({i, i, opt.mass_scale * (1.0 + 0.2 * uniform_pm1(rng))});
  }
  for (const auto& [a, b] : edges) {
    kt.push_back({a, b, -opt.stiffness});
    kt.push_back({b, a, -opt.stiffness});
    const double m = opt.mass_scale * 0.1 * (1.0 + 0.2 * uniform_pm1(rng));
    mt.push_back({a, b, m});
    mt.push_back({b, a, m});
  }

  QepParts p;
  p.k_e = CsrMatrix::from_triplets(n, n, std::move(kt));
  p.mass = CsrMatrix::from_triplets(n, n, std::move(mt));
  p.d_m = random_symmetric(n, edges, opt.damping_scale, rng);
  p.d_r = random_symmetric(n, edges, opt.damping_scale, rng);
  p.k_g = random_symmetric(n, edges, opt.geometric_scale, rng);

  std::vector<Triplet> gt, rt;
  for (const auto& [a, b] : edges) {
    const double v = opt.gyro_scale * uniform_pm1(rng);
    gt.push_back({a, b, v});
    gt.push_back({b, a, -v});
  }
  for (std::size_t i = 0; i < n; ++i) rt.push_back({i, i, opt.circulatory_scale * uniform_pm1(rng)});
  for (const auto& [a, b] : edges) {
    rt.push_back({a, b, opt.circulatory_scale * uniform_pm1(rng)});
    rt.push_back({b, a, opt.circulatory_scale * uniform_pm1(rng)});
  }
  p.d_g = CsrMatrix::from_triplets(n, n, std::move(gt));
  p.k_r = CsrMatrix::from_triplets(n, n, std::move(rt));
  return p;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& key) {
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw SpecError("sweep config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

std::size_t to_count(const std::string& v, const std::string& key) {
  std::size_t d = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw SpecError("sweep config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  return d;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

SweepConfig parse_sweep_config_text(const std::string& text, const std::filesystem::path& base) {
  SweepConfig cfg;
  const char* part_keys[] = {"mass", "k_e", "d_m", "d_r", "d_g", "k_r", "k_g"};
  std::map<std::string, std::filesystem::path> paths;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SpecError("sweep config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));

    if (std::find(std::begin(part_keys), std::end(part_keys), key) != std::end(part_keys)) {
      std::filesystem::path p(value);
      if (p.is_relative() && !base.empty()) p = base / p;
      paths[key] = p;
    } else if (key == "omega") {
      cfg.omega = to_double(value, key);
    } else if (key == "omega_ref") {
      cfg.omega_ref = to_double(value, key);
    } else if (key == "gamma") {
      std::istringstream g(value);
      std::vector<std::string> f;
      for (std::string tok; g >> tok;) f.push_back(tok);
      if (f.size() != 6)
        throw SpecError("sweep config: gamma expects 're_min re_max re_steps im_min im_max im_steps'");
      cfg.re_min = to_double(f[0], key);
      cfg.re_max = to_double(f[1], key);
      cfg.re_steps = to_count(f[2], key);
      cfg.im_min = to_double(f[3], key);
      cfg.im_max = to_double(f[4], key);
      cfg.im_steps = to_count(f[5], key);
      if (cfg.re_steps == 0 || cfg.im_steps == 0)
        throw SpecError("sweep config: gamma step counts must be at least 1");
    } else if (key == "mode") {
      if (value == "inner") cfg.mode = SweepMode::Inner;
      else if (value == "full") cfg.mode = SweepMode::Full;
      else throw SpecError("sweep config: mode must be inner or full");
    } else if (key == "precond") {
      cfg.precond = value;
    } else if (key == "rtol") {
      cfg.rel_tol = to_double(value, key);
    } else if (key == "itol") {
      cfg.inner_tol = to_double(value, key);
    } else if (key == "maxit") {
      cfg.max_iters = to_count(value, key);
    } else if (key == "seed") {
      cfg.seed = to_count(value, key);
    } else if (key == "threads") {
      cfg.threads = to_count(value, key);
    } else if (key == "synthetic_nx") {
      cfg.synthetic.nx = to_count(value, key);
    } else if (key == "synthetic_ny") {
      cfg.synthetic.ny = to_count(value, key);
    } else {
      throw SpecError("sweep config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!paths.empty()) {
    for (const char* k : part_keys) {
      if (!paths.count(k))
        throw SpecError(std::string("sweep config: missing matrix path '") + k + "'");
      cfg.matrices.push_back(paths[k]);
    }
  }
  if (!(cfg.omega > 0.0) || !(cfg.omega_ref > 0.0))
    throw SpecError("sweep config: omega and omega_ref must be positive");
  parse_precond_spec(cfg.precond);
  return cfg;
}

SweepConfig parse_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open sweep config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sweep_config_text(ss.str(), path.parent_path());
}

QepParts load_qep_parts(const SweepConfig& cfg) {
  if (cfg.matrices.empty()) return synthetic_qep(cfg.synthetic).validated();
  QepParts p;
  p.mass = load_matrix_market_general(cfg.matrices[0]);
  p.k_e = load_matrix_market_general(cfg.matrices[1]);
  p.d_m = load_matrix_market_general(cfg.matrices[2]);
  p.d_r = load_matrix_market_general(cfg.matrices[3]);
  p.d_g = load_matrix_market_general(cfg.matrices[4]);
  p.k_r = load_matrix_market_general(cfg.matrices[5]);
  p.k_g = load_matrix_market_general(cfg.matrices[6]);
  return p.validated();
}

namespace {

double grid_value(double lo, double hi, std::size_t steps, std::size_t i) {
  if (steps <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const QepParts& parts) {
  const std::size_t total = cfg.re_steps * cfg.im_steps;
  std::vector<SweepRow> rows(total);
  for (std::size_t t = 0; t < total; ++t) {
    rows[t].gamma_r = grid_value(cfg.re_min, cfg.re_max, cfg.re_steps, t % cfg.re_steps);
    rows[t].gamma_i = grid_value(cfg.im_min, cfg.im_max, cfg.im_steps, t / cfg.re_steps);
    if (rows[t].gamma_i == 0.0)
      throw SpecError("sweep grid contains a shift with zero imaginary part");
  }

  InnerSetupCache cache(parts.k_e, parts.mass, cfg.precond);
  SolveConfig inner;
  inner.rel_tol = cfg.rel_tol;
  inner.inner_tol = cfg.inner_tol;
  inner.max_iters = cfg.max_iters;
  inner.inner_max_iters = cfg.max_iters;
  const std::size_t n = parts.n();

  auto run_one = [&](std::size_t t) {
    SweepRow& row = rows[t];
    const std::uint64_t seed = cfg.seed + t;
    if (cfg.mode == SweepMode::Inner) {
      const auto setup = cache.get(row.gamma_r * row.gamma_r + row.gamma_i * row.gamma_i);
      Vector rhs = random_vector(n, seed);
      k::scale(-row.gamma_i, rhs);
      const SolveResult r = minres_cg(*setup->matrix, *setup->basis, *setup->precond, rhs, inner);
      row.converged = r.report.converged;
      row.failure = r.report.failure;
      row.outer_iters = r.report.outer_iters;
      row.inner_avg = r.report.inner_iters_avg;
      row.total_iters = r.report.total_iters;
    } else {
      ShiftParams sp{cfg.omega, cfg.omega_ref, row.gamma_r, row.gamma_i};
      const Vector f = random_vector(2 * n, seed);
      const Vector g = random_vector(2 * n, seed ^ 0x9E3779B97F4A7C15ull);
      ShiftSolveConfig scfg;
      scfg.outer.rel_tol = cfg.rel_tol;
      scfg.outer.max_iters = cfg.max_iters;
      scfg.inner = inner;
      scfg.inner.rel_tol = std::min(cfg.rel_tol, 1e-8);
      const ShiftSolveResult r = solve_shifted(parts, sp, f, g, cache, scfg);
      row.converged = r.outer.converged;
      row.failure = r.outer.failure;
      row.outer_iters = r.outer.outer_iters;
      row.inner_avg = r.inner_calls > 0 ? static_cast<double>(r.inner_inner_total) /
                                              static_cast<double>(r.inner_calls)
                                        : 0.0;
      row.total_iters = static_cast<double>(r.inner_inner_total);
    }
  };

  std::size_t threads = cfg.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, total);
  if (threads <= 1) {
    for (std::size_t t = 0; t < total; ++t) run_one(t);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      k::set_threads_for_this_thread(1);
      for (std::size_t t; (t = next++) < total;) {
        try {
          run_one(t);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "gamma_r,gamma_i,converged,outer_iters,inner_avg,total_iters\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", r.gamma_r, r.gamma_i,
                  r.converged ? 1 : 0, r.outer_iters, r.inner_avg, r.total_iters);
    out += buf;
  }
  return out;
}

}  // namespace mrcg
