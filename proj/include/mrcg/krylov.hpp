#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mrcg/eigdefl.hpp"
#include "mrcg/operator.hpp"
#include "mrcg/sparse.hpp"

namespace mrcg {

enum class FailureKind { None, MaxIters, Stagnation, ScalarBreakdown };

/// "ok", "†", "‡" or "∗".
const char* status_symbol(FailureKind kind) noexcept;
/// "ok", "max_iters", "stagnation" or "breakdown".
const char* status_name(FailureKind kind) noexcept;

struct SolveConfig {
  double rel_tol = 1e-5;
  /// Iteration cap. GMRES counts flattened steps; nested schemes cap both
  /// the outer count and the cumulative inner count.
  std::size_t max_iters = 20000;
  std::size_t restart = 20;
  /// Inner tolerance of nested schemes. For FGMRES a value <= 0 replaces the
  /// inner GMRES by a single preconditioner application.
  double inner_tol = 1e-3;
  std::size_t inner_max_iters = 20000;
  std::size_t inner_restart = 20;
  std::size_t stagnation_window = 50;
  Vector x0;  ///< empty means zero
};

struct SolveReport {
  bool converged = false;
  FailureKind failure = FailureKind::None;
  /// Outer iterations; ends in .5 for a BiCGStab half step, flattened
  /// (o-1)*m + i for GMRES.
  double outer_iters = 0.0;
  /// GMRES o(i): restart cycle of the last step and its position in the cycle.
  std::size_t cycles = 0;
  std::size_t cycle_iters = 0;
  /// Nested schemes only: inner iterations per preconditioner application.
  std::vector<std::size_t> inner_iters;
  std::size_t inner_iters_total = 0;
  double inner_iters_avg = 0.0;
  /// Inner total for MINRES-CG, outer + inner for
  /// FGMRES-GMRES, outer_iters otherwise.
  double total_iters = 0.0;
  /// True relative residuals, starting with the initial guess.
  Vector history;
  /// Iteration index of each history entry.
  Vector history_index;
  double final_rel_residual = 0.0;
};

struct SolveResult {
  Vector x;
  SolveReport report;
};

/// Preconditioned MINRES; the preconditioner must be symmetric positive
/// definite (a negative preconditioned norm is reported as breakdown).
SolveResult minres(const LinearOperator& op, const LinearOperator& precond,
                   std::span<const double> b, const SolveConfig& cfg = {});

/// Preconditioned CG for SPD op; the preconditioner may be indefinite.
SolveResult pcg(const LinearOperator& op, const LinearOperator& precond,
                std::span<const double> b, const SolveConfig& cfg = {});

/// Left-preconditioned GMRES(cfg.restart) stopping on the true residual.
SolveResult gmres_restarted(const LinearOperator& op, const LinearOperator& precond,
                            std::span<const double> b, const SolveConfig& cfg = {});

/// FGMRES(cfg.restart) whose preconditioner is GMRES(cfg.inner_restart)
/// with `precond`, run to cfg.inner_tol.
SolveResult fgmres_gmres(const LinearOperator& op, const LinearOperator& precond,
                         std::span<const double> b, const SolveConfig& cfg = {});

/// Right-preconditioned BiCGStab with a convergence check after the half step.
SolveResult bicgstab(const LinearOperator& op, const LinearOperator& precond,
                     std::span<const double> b, const SolveConfig& cfg = {});

/// MINRES on A preconditioned by inner PCG solves with M_mr = A + 2V|L|V^T,
/// the PCG itself preconditioned by m_cg.
SolveResult minres_cg(const LinearOperator& a, const DeflationBasis& basis,
                      const LinearOperator& m_cg, std::span<const double> b,
                      const SolveConfig& cfg = {});

/// As minres_cg with the inner preconditioner inverse_approx(g) - 2V L^-1 V^T g.
SolveResult minres_cg_star(const LinearOperator& a, const DeflationBasis& basis,
                           std::shared_ptr<const LinearOperator> inverse_approx,
                           std::span<const double> b, const SolveConfig& cfg = {});

/// ||b - A x||_2 / ||b||_2 (or ||b - A x||_2 when b = 0).
double relative_residual(const LinearOperator& op, std::span<const double> b,
                         std::span<const double> x);

// ---------------------------------------------------------------------------
// Solver spec strings

enum class SolverKind { MinresCg, MinresCgStar, Minres, Cg, Gmres, Fgmres, Bicgstab };

struct SolverSpec {
  SolverKind kind = SolverKind::MinresCg;
  std::size_t restart = 0;
  std::size_t inner_restart = 0;
  std::string text;
};

/// Parses `minres-cg`, `minres-cg-star`, `minres`, `cg`, `gmres:<m>`,
/// `fgmres:<m1>:<m2>` and `bicgstab`. Throws SpecError.
SolverSpec parse_solver_spec(const std::string& text);

/// Auxiliary n-vectors a solver keeps besides x and b.
std::size_t storage_vectors(const SolverSpec& spec, std::size_t k);

}  // namespace mrcg
