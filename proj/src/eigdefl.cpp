#include "mrcg/eigdefl.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>

#include "mrcg/kernels.hpp"
#include "mrcg/precond.hpp"
#include "mrcg/rng.hpp"

namespace mrcg {

DeflationBasis DeflationBasis::empty(std::size_t n) {
  return DeflationBasis{DenseColumnBlock(n, 0), {}, {}};
}

namespace {

Eigen::MatrixXd to_dense(const SparseSymMatrix& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.n()),
                                            static_cast<Eigen::Index>(a.n()));
  for (const auto& t : a.csr().triplets())
    d(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
  return d;
}

Eigen::SparseMatrix<double> to_eigen_sparse(const SparseSymMatrix& a) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nnz());
  for (const auto& e : a.csr().triplets())
    t.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(a.n()),
                                static_cast<Eigen::Index>(a.n()));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

double residual_norm(const SparseSymMatrix& a, std::span<const double> v, double lambda) {
  Vector r = matvec(a, v);
  kernels::axpy(-lambda, v, r);
  return kernels::nrm2(r);
}

void fill_residuals(const SparseSymMatrix& a, DeflationBasis& basis) {
  basis.residual_norms.resize(basis.k());
  for (std::size_t j = 0; j < basis.k(); ++j)
    basis.residual_norms[j] = residual_norm(a, basis.vectors.column(j), basis.lambda[j]);
}

void check_residuals(const DeflationBasis& basis, double eig_tol) {
  for (std::size_t j = 0; j < basis.k(); ++j)
    if (!(basis.residual_norms[j] <= eig_tol * std::abs(basis.lambda[j])))
      throw EigenError("eigenpair " + std::to_string(j) + " residual " +
                           std::to_string(basis.residual_norms[j]) +
                           " exceeds eig_tol * |lambda|",
                       basis);
}

DeflationBasis dense_negative_eigenpairs(const SparseSymMatrix& a, const EigConfig& cfg) {
  const std::size_t n = a.n();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(a));
  if (es.info() != Eigen::Success)
    throw EigenError("dense eigensolver failed", DeflationBasis::empty(n));
  const auto& ev = es.eigenvalues();
  const double singular_tol = cfg.eig_tol * a.frobenius_norm();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) < singular_tol) throw SingularMatrixError(ev(i));

  std::size_t k = 0;
  while (k < n && ev(static_cast<Eigen::Index>(k)) < 0.0) ++k;
  DeflationBasis basis{DenseColumnBlock(n, k), Vector(k), {}};
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    basis.lambda[j] = ev(col);
    auto out = basis.vectors.column(j);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), col);
  }
  fill_residuals(a, basis);
  check_residuals(basis, cfg.eig_tol);
  return basis;
}

// Two passes of classical Gram-Schmidt against the given columns.
void orthogonalize(std::span<double> w, const std::vector<Vector>& against) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : against) kernels::axpy(-kernels::dot(q, w), q, w);
}

// Thick-restart (Krylov-Schur) Lanczos on A^-1 with full
// reorthogonalization. Negative eigenvalues of A are the negative Ritz
// values of A^-1; converged ones are locked and deflated from later cycles.
class ShiftInvertLanczos {
 public:
  ShiftInvertLanczos(const SparseSymMatrix& a, const EigConfig& cfg)
      : a_(a), cfg_(cfg), rng_(cfg.seed) {
    lu_.compute(to_eigen_sparse(a));
    if (lu_.info() != Eigen::Success) throw SingularMatrixError(0.0);
    const auto inertia = sylvester_count();
    exact_target_ = inertia.has_value();
    target_ = inertia.value_or(0);
    singular_tol_ = cfg_.eig_tol * a_.frobenius_norm();
  }

  DeflationBasis run() {
    const std::size_t n = a_.n();
    std::size_t stalled = 0;
    bool confirmed = false;
    fresh_start();
    for (std::size_t cycle = 0; cycle < cfg_.max_restarts; ++cycle) {
      const std::size_t room = n - locked_.size();
      if (room == 0) {
        confirmed = true;
        break;
      }
      const std::size_t m = std::min(std::max<std::size_t>(cfg_.max_lanczos_dim, 8), room);
      const std::size_t before = locked_.size();
      expand(m);
      const bool done = restart(m);
      if (done && (locked_.size() >= target_ || stalled >= kMaxStall)) {
        confirmed = true;
        break;
      }
      if (done) {
        // Looks finished but the LDL^T inertia says otherwise: look again
        // from a fresh direction.
        ++stalled;
        fresh_start();
      } else if (locked_.size() == before && basis_.size() <= 1) {
        fresh_start();
      }
      if (locked_.size() > before) stalled = 0;
    }
    if (!confirmed)
      throw EigenError("shift-invert Lanczos did not confirm the last negative "
                       "eigenvalue within max_restarts",
                       rayleigh_ritz());
    DeflationBasis basis = rayleigh_ritz();
    check_residuals(basis, cfg_.eig_tol);
    return basis;
  }

 private:
  // Negative pivot count of a sparse LDL^T (the inertia of A), or nullopt
  // when the factorization is unusable.
  std::optional<std::size_t> sylvester_count() const {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                          Eigen::AMDOrdering<int>> ldlt(to_eigen_sparse(a_));
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!std::isfinite(dmax) || dmax == 0.0) return std::nullopt;
    std::size_t neg = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!std::isfinite(d(i)) || std::abs(d(i)) < 1e-12 * dmax) return std::nullopt;
      if (d(i) < 0.0) ++neg;
    }
    return neg;
  }

  void solve(std::span<const double> x, std::span<double> y) {
    Eigen::Map<const Eigen::VectorXd> xm(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd r = lu_.solve(xm);
    std::copy(r.data(), r.data() + r.size(), y.begin());
  }

  Vector random_vector() {
    Vector v(a_.n());
    for (double& x : v) x = uniform_pm1(rng_);
    return v;
  }

  // Orthonormalizes w against locked vectors and the current basis; returns
  // the norm before normalization.
  double orthonormalize(Vector& w) {
    double before = kernels::nrm2(w);
    orthogonalize(w, locked_);
    orthogonalize(w, basis_);
    double nrm = kernels::nrm2(w);
    if (nrm <= 1e-12 * before || nrm == 0.0) return 0.0;
    kernels::scale(1.0 / nrm, w);
    return nrm;
  }

  void fresh_start() {
    basis_.clear();
    h_ = Eigen::MatrixXd();
    for (int attempt = 0; attempt < 4; ++attempt) {
      Vector v = random_vector();
      if (orthonormalize(v) > 0.0) {
        basis_.push_back(std::move(v));
        return;
      }
    }
  }

  // Extends the Krylov decomposition A^-1 V = V H + r e^T to m columns.
  // H is symmetric up to rounding; column j holds V^T A^-1 v_j.
  void expand(std::size_t m) {
    const std::size_t n = a_.n();
    const auto mm = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mm + 1, mm);
    const auto l = static_cast<Eigen::Index>(std::min<std::size_t>(h_.cols(), m));
    if (l > 0) h.topLeftCorner(std::min<Eigen::Index>(h_.rows(), mm + 1), l) =
        h_.topLeftCorner(std::min<Eigen::Index>(h_.rows(), mm + 1), l);
    residual_norm_ = 0.0;
    Vector w(n);
    for (std::size_t j = static_cast<std::size_t>(l); j < m && j < basis_.size(); ++j) {
      solve(basis_[j], w);
      orthogonalize(w, locked_);
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < basis_.size(); ++i) {
          const double c = kernels::dot(basis_[i], w);
          kernels::axpy(-c, basis_[i], w);
          h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += c;
        }
      const double beta = kernels::nrm2(w);
      h(static_cast<Eigen::Index>(j) + 1, static_cast<Eigen::Index>(j)) = beta;
      if (j + 1 == m) {
        residual_norm_ = beta;
        if (beta > 0.0) {
          next_ = w;
          kernels::scale(1.0 / beta, next_);
        }
        break;
      }
      if (beta <= 1e-13 * h.topLeftCorner(static_cast<Eigen::Index>(j) + 1,
                                          static_cast<Eigen::Index>(j) + 1).norm()) {
        // Invariant subspace: continue with a fresh orthogonal direction.
        h(static_cast<Eigen::Index>(j) + 1, static_cast<Eigen::Index>(j)) = 0.0;
        Vector v = random_vector();
        if (orthonormalize(v) == 0.0) break;
        basis_.push_back(std::move(v));
        continue;
      }
      kernels::scale(1.0 / beta, w);
      basis_.push_back(w);
    }
    h_ = h.topLeftCorner(static_cast<Eigen::Index>(basis_.size()),
                         static_cast<Eigen::Index>(basis_.size()));
    if (basis_.size() < m) residual_norm_ = 0.0;
  }

  Vector ritz_vector(const Eigen::MatrixXd& s, Eigen::Index col) const {
    Vector y(a_.n(), 0.0);
    for (std::size_t j = 0; j < basis_.size(); ++j)
      kernels::axpy(s(static_cast<Eigen::Index>(j), col), basis_[j], y);
    return y;
  }

  // Locks converged negative pairs and restarts with the wanted Ritz
  // vectors. Returns true when no negative Ritz value remains and the
  // smallest positive one has converged.
  bool restart(std::size_t m) {
    const auto k = static_cast<Eigen::Index>(basis_.size());
    if (k == 0) return true;
    const Eigen::MatrixXd t = 0.5 * (h_ + h_.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const auto& theta = es.eigenvalues();
    const auto& s = es.eigenvectors();

    // Ritz values of A^-1 never exceed its spectral radius, so one large
    // theta already proves an eigenvalue of A below singular_tol.
    for (Eigen::Index j : {Eigen::Index{0}, k - 1})
      if (std::abs(theta(j)) * singular_tol_ > 1.0) throw SingularMatrixError(1.0 / theta(j));

    std::vector<Vector> keep;
    std::vector<double> keep_theta;
    std::vector<double> keep_coupling;
    bool positive_confirmed = false;
    std::size_t negatives_left = 0;
    const std::size_t keep_max = std::max<std::size_t>(m / 2, 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double th = theta(i);
      const double coupling = residual_norm_ * s(k - 1, i);
      const bool small = std::abs(coupling) <= cfg_.eig_tol * std::abs(th);
      if (th < 0.0 && small) {
        Vector y = ritz_vector(s, i);
        const double lambda = 1.0 / th;
        if (residual_norm(a_, y, lambda) <= cfg_.eig_tol * std::abs(lambda)) {
          if (std::abs(lambda) < singular_tol_) throw SingularMatrixError(lambda);
          orthogonalize(y, locked_);
          kernels::scale(1.0 / kernels::nrm2(y), y);
          locked_.push_back(std::move(y));
          continue;
        }
      }
      if (th < 0.0) ++negatives_left;
      if (th > 0.0 && keep_theta.empty() && negatives_left == 0) {
        // Loose test: this only backs up the inertia count.
        positive_confirmed = std::abs(coupling) <= std::sqrt(cfg_.eig_tol) * th;
      }
      if (keep.size() < keep_max && (th < 0.0 || keep.size() < negatives_left + 8)) {
        keep.push_back(ritz_vector(s, i));
        keep_theta.push_back(th);
        keep_coupling.push_back(coupling);
      }
    }
    if (locked_.size() >= a_.n()) return true;
    if (exact_target_ && negatives_left == 0 && locked_.size() >= target_) return true;
    if (negatives_left == 0 && (positive_confirmed || residual_norm_ == 0.0)) return true;

    // New decomposition: kept Ritz vectors, then the residual direction.
    basis_ = std::move(keep);
    for (auto& y : basis_) {
      orthogonalize(y, locked_);
      kernels::scale(1.0 / kernels::nrm2(y), y);
    }
    const auto l = static_cast<Eigen::Index>(basis_.size());
    h_ = Eigen::MatrixXd::Zero(l + 1, l);
    for (Eigen::Index i = 0; i < l; ++i) {
      h_(i, i) = keep_theta[static_cast<std::size_t>(i)];
      h_(l, i) = keep_coupling[static_cast<std::size_t>(i)];
    }
    Vector next = residual_norm_ > 0.0 ? next_ : random_vector();
    if (orthonormalize(next) == 0.0) {
      next = random_vector();
      if (orthonormalize(next) == 0.0) return true;
      h_.row(l).setZero();
    }
    basis_.push_back(std::move(next));
    return false;
  }

  DeflationBasis rayleigh_ritz() const {
    const std::size_t n = a_.n();
    const std::size_t k = locked_.size();
    if (k == 0) return DeflationBasis::empty(n);
    std::vector<Vector> av;
    for (const auto& q : locked_) av.push_back(matvec(a_, q));
    Eigen::MatrixXd h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            kernels::dot(locked_[i], av[j]);
    h = 0.5 * (h + h.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    DeflationBasis basis{DenseColumnBlock(n, k), Vector(k), {}};
    for (std::size_t j = 0; j < k; ++j) {
      basis.lambda[j] = es.eigenvalues()(static_cast<Eigen::Index>(j));
      auto out = basis.vectors.column(j);
      for (std::size_t i = 0; i < k; ++i)
        kernels::axpy(es.eigenvectors()(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(j)),
                      locked_[i], out);
    }
    fill_residuals(a_, basis);
    return basis;
  }

  static constexpr std::size_t kMaxStall = 20;

  const SparseSymMatrix& a_;
  const EigConfig& cfg_;
  std::mt19937_64 rng_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Vector> locked_;
  std::vector<Vector> basis_;
  Eigen::MatrixXd h_;
  Vector next_;
  double residual_norm_ = 0.0;
  double singular_tol_ = 0.0;
  std::size_t target_ = 0;
  bool exact_target_ = false;
};

}  // namespace

DeflationBasis negative_eigenpairs(const SparseSymMatrix& a, const EigConfig& cfg) {
  if (!(cfg.eig_tol > 0.0)) throw InvalidArgument("eig_tol must be positive");
  if (cfg.dense_threshold < 1) throw InvalidArgument("dense_threshold must be >= 1");
  if (a.n() == 0) return DeflationBasis::empty(0);
  if (a.n() <= cfg.dense_threshold) return dense_negative_eigenpairs(a, cfg);
  ShiftInvertLanczos lanczos(a, cfg);
  return lanczos.run();
}

double basis_residual(const SparseSymMatrix& a, const DeflationBasis& basis) {
  double sum = 0.0;
  for (std::size_t j = 0; j < basis.k(); ++j) {
    const double r = residual_norm(a, basis.vectors.column(j), basis.lambda[j]);
    sum += r * r;
  }
  return std::sqrt(sum);
}

double orthonormality_error(const DeflationBasis& basis) {
  double sum = 0.0;
  for (std::size_t i = 0; i < basis.k(); ++i)
    for (std::size_t j = 0; j < basis.k(); ++j) {
      const double g = kernels::dot(basis.vectors.column(i), basis.vectors.column(j)) -
                       (i == j ? 1.0 : 0.0);
      sum += g * g;
    }
  return std::sqrt(sum);
}

Inertia inertia_count(const BlockLdlFactors& factors) {
  if (!factors.is_complete)
    throw InvalidArgument("inertia_count needs a complete factorization");
  double scale = 0.0;
  for (const auto& b : factors.blocks)
    scale = std::max({scale, std::abs(b.a), std::abs(b.b), std::abs(b.c)});
  const double zero_tol = 1e-14 * scale;
  Inertia in;
  auto count = [&](double v) {
    if (std::abs(v) <= zero_tol) ++in.zero;
    else if (v < 0.0) ++in.negative;
    else ++in.positive;
  };
  for (const auto& b : factors.blocks) {
    if (b.size == 1) {
      count(b.a);
    } else {
      const TwoByTwoEigen e = eigen_2x2(b.a, b.b, b.c);
      count(e.lambda1);
      count(e.lambda2);
    }
  }
  return in;
}

std::uint64_t content_hash(const SparseSymMatrix& a) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(a.n());
  for (std::size_t o : a.csr().row_offsets()) mix(o);
  for (std::size_t c : a.csr().col_indices()) mix(c);
  for (double v : a.csr().values()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

namespace {

constexpr char kMagic[8] = {'M', 'R', 'C', 'G', 'D', 'E', 'F', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes, sizeof bytes);
}

template <class T>
bool get_le(std::istream& in, T& value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) return false;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  value = std::bit_cast<T>(bits);
  return true;
}

}  // namespace

void save_basis(const std::filesystem::path& path, const DeflationBasis& basis,
                std::uint64_t hash, double eig_tol) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write basis cache " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le(out, kVersion);
  put_le(out, hash);
  put_le(out, eig_tol);
  put_le(out, static_cast<std::uint64_t>(basis.n()));
  put_le(out, static_cast<std::uint64_t>(basis.k()));
  for (double l : basis.lambda) put_le(out, l);
  for (double v : basis.vectors.data()) put_le(out, v);
  if (!out) throw Error("cannot write basis cache " + path.string());
}

std::optional<DeflationBasis> load_basis(const std::filesystem::path& path,
                                         const SparseSymMatrix& a, double eig_tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    return std::nullopt;
  std::uint32_t version = 0;
  std::uint64_t hash = 0, n = 0, k = 0;
  double tol = 0.0;
  if (!get_le(in, version) || version != kVersion || !get_le(in, hash) ||
      !get_le(in, tol) || !get_le(in, n) || !get_le(in, k))
    return std::nullopt;
  if (hash != content_hash(a) || tol != eig_tol || n != a.n() || k > n)
    return std::nullopt;
  DeflationBasis basis{DenseColumnBlock(n, k), Vector(k), {}};
  for (double& l : basis.lambda)
    if (!get_le(in, l)) return std::nullopt;
  for (double& v : basis.vectors.data())
    if (!get_le(in, v)) return std::nullopt;
  fill_residuals(a, basis);
  return basis;
}

BasisCache::BasisCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::shared_ptr<const DeflationBasis> BasisCache::get_or_compute(const SparseSymMatrix& a,
                                                                 const EigConfig& cfg) {
  char name[64];
  std::snprintf(name, sizeof name, "%016llx_%.3e.defl",
                static_cast<unsigned long long>(content_hash(a)), cfg.eig_tol);
  const std::string key(name);
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  std::optional<DeflationBasis> loaded;
  if (!dir_.empty()) loaded = load_basis(dir_ / key, a, cfg.eig_tol);
  std::shared_ptr<const DeflationBasis> basis;
  if (loaded) {
    basis = std::make_shared<const DeflationBasis>(std::move(*loaded));
  } else {
    basis = std::make_shared<const DeflationBasis>(negative_eigenpairs(a, cfg));
    if (!dir_.empty()) save_basis(dir_ / key, *basis, content_hash(a), cfg.eig_tol);
  }
  memory_.emplace(key, basis);
  return basis;
}

}  // namespace mrcg
