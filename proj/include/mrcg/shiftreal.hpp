#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mrcg/eigdefl.hpp"
#include "mrcg/krylov.hpp"
#include "mrcg/precond.hpp"
#include "mrcg/sparse.hpp"

namespace mrcg {

/// Coefficients of the parametric brake QEP. Symmetric parts are
/// symmetrized exactly by `validated()`.
struct QepParts {
  CsrMatrix mass;  ///< SPD
  CsrMatrix k_e;   ///< SPD
  CsrMatrix d_m;   ///< symmetric
  CsrMatrix d_r;   ///< symmetric
  CsrMatrix k_g;   ///< symmetric
  CsrMatrix d_g;   ///< skew-symmetric
  CsrMatrix k_r;   ///< general

  std::size_t n() const noexcept { return mass.rows(); }

  /// Checks sizes and (skew-)symmetry to 1e-12 relative, then returns a copy
  /// whose symmetric parts are exactly symmetric and whose skew part is
  /// exactly skew. Throws DimensionError or InvalidArgument.
  QepParts validated() const;
};

struct ShiftParams {
  double omega = 1.0;
  double omega_ref = 1.0;
  double gamma_r = 0.0;
  double gamma_i = 1.0;

  double gamma_abs2() const noexcept { return gamma_r * gamma_r + gamma_i * gamma_i; }
};

struct QepMatrices {
  CsrMatrix d_omega;
  CsrMatrix k_omega;
};

/// D = D_M + (W_ref/W - 1) D_R + (W/W_ref) D_G,
/// K = K_E + K_R + ((W/W_ref)^2 - 1) K_g.
QepMatrices assemble_qep(const QepParts& parts, const ShiftParams& p);

struct Pencil {
  CsrMatrix a;  ///< [[0, I], [-K, -D]]
  CsrMatrix b;  ///< [[I, 0], [0, M]]
};

Pencil companion_pencil(const CsrMatrix& mass, const CsrMatrix& d_omega,
                        const CsrMatrix& k_omega);

/// Real form of (gamma B - A)(x + iy) = f + ig:
///   [[B^, -A^], [A^, B^]] [x; -y] = [g; f]
/// with A^ = gamma_r B - A and B^ = gamma_i B.
class RealBlockSystem final : public LinearOperator {
 public:
  RealBlockSystem(const Pencil& pencil, double gamma_r, double gamma_i);

  std::size_t size() const override { return 2 * a_hat_.rows(); }
  void apply(std::span<const double> u, std::span<double> y) const override;

  const CsrMatrix& a_hat() const noexcept { return a_hat_; }
  const CsrMatrix& b_hat() const noexcept { return b_hat_; }

  /// [g; f]
  static Vector rhs(std::span<const double> f, std::span<const double> g);
  /// Splits [x; -y] into x and y.
  static std::pair<Vector, Vector> unknowns(std::span<const double> u);

 private:
  CsrMatrix a_hat_;
  CsrMatrix b_hat_;
};

RealBlockSystem real_block_system(const Pencil& pencil, double gamma_r, double gamma_i);

/// The inner matrix K_E - |gamma|^2 M. Depends on gamma only through |gamma|^2.
SparseSymMatrix inner_matrix(const CsrMatrix& k_e, const CsrMatrix& mass, double gamma_abs2);

/// Solvers used inside the block preconditioner.
struct ShiftSolvers {
  /// Approximates M^-1.
  std::shared_ptr<const LinearOperator> mass_inverse;
  /// Approximates (K_E - |gamma|^2 M)^-1.
  std::shared_ptr<const LinearOperator> inner_inverse;
};

struct SchurConfig {
  double rel_tol = 1e-8;
  std::size_t max_iters = 500;
  std::size_t restart = 30;
};

/// S^-1 v for S = B~ + A~ B~^-1 A~ = S1 S2: multiply by S1^-1 = diag(M, I),
/// then solve S2 by GMRES preconditioned with the block lower triangular S~2.
/// Each S~2 block solve is T u = v with T = (g_i + g_r^2/g_i) M - K_E/g_i,
/// evaluated as (K_E - |gamma|^2 M) u = -g_i v.
class SchurSolver {
 public:
  SchurSolver(const CsrMatrix& k_e, const CsrMatrix& mass, double gamma_r, double gamma_i,
              std::shared_ptr<const LinearOperator> inner_inverse, SchurConfig cfg = {});

  Vector solve(std::span<const double> rhs) const;

  /// y = S2 z, matrix-free.
  void apply_s2(std::span<const double> z, std::span<double> y) const;
  /// y = S~2^-1 v using the inner solver.
  void apply_s2_tilde_inverse(std::span<const double> v, std::span<double> y) const;

  std::size_t solves() const noexcept { return solves_; }
  std::size_t gmres_iterations() const noexcept { return gmres_iters_; }
  /// Solves that did not reach rel_tol.
  std::size_t failures() const noexcept { return failures_; }

 private:
  void apply_t_inverse(std::span<const double> v, std::span<double> u) const;

  const CsrMatrix& k_e_;
  const CsrMatrix& mass_;
  double gamma_r_;
  double gamma_i_;
  double c_;  // g_i + g_r^2 / g_i
  double e_;  // 2 g_r / g_i
  std::shared_ptr<const LinearOperator> inner_;
  SchurConfig cfg_;
  mutable std::atomic<std::size_t> solves_{0};
  mutable std::atomic<std::size_t> gmres_iters_{0};
  mutable std::atomic<std::size_t> failures_{0};
};

Vector schur_solve(const SchurSolver& s, std::span<const double> rhs);

/// M = [[B~, -A~], [A~, B~]] with A~ = [[g_r I, -I], [K_E, g_r M]] and
/// B~ = diag(g_i I, g_i M), applied through its block LU factorization.
class BlockPreconditioner final : public PreconditionerAction {
 public:
  BlockPreconditioner(const CsrMatrix& k_e, const CsrMatrix& mass, double gamma_r,
                      double gamma_i, ShiftSolvers solvers, SchurConfig cfg = {});

  std::size_t size() const override { return 4 * mass_.rows(); }
  void apply(std::span<const double> r, std::span<double> t) const override;
  std::string label() const override { return "block-lu"; }

  const SchurSolver& schur() const noexcept { return schur_; }

 private:
  void apply_a_tilde(std::span<const double> u, std::span<double> y) const;
  void apply_b_tilde_inverse(std::span<const double> u, std::span<double> y) const;

  const CsrMatrix& k_e_;
  const CsrMatrix& mass_;
  double gamma_r_;
  double gamma_i_;
  ShiftSolvers solvers_;
  SchurSolver schur_;
};

Vector block_precond_apply(const BlockPreconditioner& m, std::span<const double> rhs);

/// Jacobi-preconditioned CG approximating M^-1 for SPD M.
std::shared_ptr<const LinearOperator> jacobi_cg_inverse(const SparseSymMatrix& m,
                                                        double rel_tol = 1e-13,
                                                        std::size_t max_iters = 10000);

/// Inner solver for K_E - |gamma|^2 M: MINRES-CG with the given deflation
/// basis and inner preconditioner (an `smw:` preconditioner gives
/// MINRES-CG*). Counts calls and iterations.
class MinresCgInverse final : public LinearOperator {
 public:
  MinresCgInverse(std::shared_ptr<const SparseSymMatrix> a,
                  std::shared_ptr<const DeflationBasis> basis,
                  std::shared_ptr<const PreconditionerAction> precond, SolveConfig cfg);

  std::size_t size() const override { return a_->n(); }
  void apply(std::span<const double> x, std::span<double> y) const override;

  std::size_t calls() const noexcept { return calls_; }
  std::size_t outer_total() const noexcept { return outer_total_; }
  std::size_t inner_total() const noexcept { return inner_total_; }
  std::size_t failures() const noexcept { return failures_; }

 private:
  std::shared_ptr<const SparseSymMatrix> a_;
  std::shared_ptr<const DeflationBasis> basis_;
  std::shared_ptr<const PreconditionerAction> precond_;
  SolveConfig cfg_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> outer_total_{0};
  mutable std::atomic<std::size_t> inner_total_{0};
  mutable std::atomic<std::size_t> failures_{0};
};

/// Everything needed to solve with K_E - |gamma|^2 M at one modulus.
struct InnerSetup {
  std::shared_ptr<const SparseSymMatrix> matrix;
  std::shared_ptr<const DeflationBasis> basis;
  std::shared_ptr<const PreconditionerAction> precond;
};

/// Inner matrices, deflation bases and preconditioners keyed by |gamma|^2
/// rounded to 12 significant digits. Thread safe; each key is built once.
class InnerSetupCache {
 public:
  InnerSetupCache(const CsrMatrix& k_e, const CsrMatrix& mass, std::string precond_spec,
                  EigConfig eig = {});

  std::shared_ptr<const InnerSetup> get(double gamma_abs2);
  std::size_t size() const;

  static std::string key(double gamma_abs2);

 private:
  const CsrMatrix& k_e_;
  const CsrMatrix& mass_;
  std::string precond_spec_;
  EigConfig eig_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const InnerSetup>> entries_;
  std::map<std::string, std::shared_ptr<std::mutex>> building_;
};

struct ShiftSolveConfig {
  SolveConfig outer;    ///< GMRES on the 4n system
  SchurConfig schur;    ///< GMRES on S2
  SolveConfig inner;    ///< MINRES-CG on K_E - |gamma|^2 M
  double mass_tol = 1e-13;
};

struct ShiftSolveResult {
  Vector x;
  Vector y;
  SolveReport outer;
  std::size_t inner_calls = 0;
  std::size_t inner_outer_total = 0;  ///< MINRES iterations over all inner solves
  std::size_t inner_inner_total = 0;  ///< CG iterations over all inner solves
  std::size_t schur_gmres_total = 0;
};

/// Solves (gamma B - A)(x + iy) = f + ig for the parametric QEP pencil with
/// GMRES preconditioned by the block preconditioner.
ShiftSolveResult solve_shifted(const QepParts& parts, const ShiftParams& p,
                               std::span<const double> f, std::span<const double> g,
                               InnerSetupCache& cache, const ShiftSolveConfig& cfg = {});

// ---------------------------------------------------------------------------
// Synthetic instances and sweep configuration

struct SyntheticQepOptions {
  std::size_t nx = 8;
  std::size_t ny = 1;  ///< 1 gives a 1D chain
  double stiffness = 1.0e4;
  double mass_scale = 1.0;
  double damping_scale = 1.0;
  double gyro_scale = 1.0;
  double circulatory_scale = 10.0;
  double geometric_scale = 10.0;
  std::uint64_t seed = 1;
};

/// SPD Laplacian-based K_E, diagonally dominant SPD mass with ||M||_F much
/// smaller than ||K_E||_F, small random symmetric D_M, D_R, K_g, skew D_G and
/// general K_R on the same pattern.
QepParts synthetic_qep(const SyntheticQepOptions& opt);

enum class SweepMode { Inner, Full };

struct SweepConfig {
  std::vector<std::filesystem::path> matrices;  ///< M, K_E, D_M, D_R, D_G, K_R, K_g
  double omega = 4.0 * 3.141592653589793;
  double omega_ref = 4.0 * 3.141592653589793;
  double re_min = 0.0, re_max = 0.0;
  std::size_t re_steps = 1;
  double im_min = 1.0, im_max = 1.0;
  std::size_t im_steps = 1;
  SweepMode mode = SweepMode::Inner;
  std::string precond = "ilu0";
  double rel_tol = 1e-3;
  double inner_tol = 1e-2;
  std::size_t max_iters = 2000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  ///< 0 picks hardware concurrency
  /// When no matrices are given, a synthetic instance of this size is used.
  SyntheticQepOptions synthetic;
};

/// key = value lines, '#' comments. Keys: mass, k_e, d_m, d_r, d_g, k_r,
/// k_g (paths), omega, omega_ref, gamma (six numbers:
/// re_min re_max re_steps im_min im_max im_steps), mode (inner|full),
/// precond, rtol, itol, maxit, seed, threads, synthetic_nx, synthetic_ny.
/// Relative paths resolve against the config file's directory.
SweepConfig parse_sweep_config(const std::filesystem::path& path);
SweepConfig parse_sweep_config_text(const std::string& text,
                                    const std::filesystem::path& base_dir = {});

struct SweepRow {
  double gamma_r = 0.0;
  double gamma_i = 0.0;
  bool converged = false;
  FailureKind failure = FailureKind::None;
  double outer_iters = 0.0;
  double inner_avg = 0.0;
  double total_iters = 0.0;
};

QepParts load_qep_parts(const SweepConfig& cfg);

/// Runs the shift grid; rows come back in grid order (real part fastest).
std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const QepParts& parts);

/// CSV with columns gamma_r,gamma_i,converged,outer_iters,inner_avg,total_iters.
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace mrcg
