#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mrcg/eigdefl.hpp"
#include "mrcg/operator.hpp"
#include "mrcg/sparse.hpp"

namespace mrcg {

// ---------------------------------------------------------------------------
// Incomplete LU

struct IluFactors {
  CsrMatrix lower;  ///< strictly lower part of L; the unit diagonal is implicit
  CsrMatrix upper;  ///< U including its diagonal (stored first in each row)
  bool modified = false;
  double drop_tol = 0.0;

  std::size_t n() const noexcept { return upper.rows(); }
  /// Solves L U t = g.
  void solve(std::span<const double> g, std::span<double> t) const;
};

/// ILU(0) on the sparsity pattern of A. Throws ZeroPivotError.
IluFactors ilu0(const SparseSymMatrix& a);

/// Threshold ILU without a fill cap: entries of the working row with
/// magnitude below drop_tol * ||a_i||_2 are dropped. With `modified` every
/// dropped value is added to the diagonal of its row (row sums preserved).
IluFactors ilut(const SparseSymMatrix& a, double drop_tol, bool modified);

class IluPreconditioner final : public PreconditionerAction {
 public:
  IluPreconditioner(IluFactors factors, std::string label);

  const IluFactors& factors() const noexcept { return factors_; }
  std::size_t size() const override { return factors_.n(); }
  void apply(std::span<const double> x, std::span<double> y) const override;
  std::string label() const override { return label_; }

 private:
  IluFactors factors_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Block LDL^T

/// A 1x1 pivot [a] or a symmetric 2x2 pivot [[a, b], [b, c]] starting at
/// position `start` of the permuted ordering.
struct PivotBlock {
  std::size_t start = 0;
  std::size_t size = 1;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// P S A S P^T ~= L D L^T, where S is the diagonal equilibration (identity
/// when disabled) and perm[new] = old.
struct BlockLdlFactors {
  std::vector<std::size_t> perm;
  Vector scaling;
  CsrMatrix lower;  ///< strictly lower part of L in permuted indexing
  std::vector<PivotBlock> blocks;
  std::size_t fill_level = 0;
  double drop_tol = 0.0;
  bool is_complete = false;

  std::size_t n() const noexcept { return perm.size(); }
  /// Applies S P^T L^-T D^-1 L^-1 P S.
  void solve(std::span<const double> g, std::span<double> t) const;
  /// Nonzeros in L (unit diagonal included) plus the stored D entries.
  std::size_t factor_nnz() const noexcept;
};

struct IldltOptions {
  std::size_t fill_level = 3;
  double drop_tol = 1e-3;
  bool reorder = true;      ///< minimum-degree preorder
  bool equilibrate = true;  ///< symmetric diagonal scaling
};

/// Incomplete LDL^T with Bunch-Kaufman 1x1/2x2 pivoting. fill_level >= n and
/// drop_tol == 0 give a complete factorization.
BlockLdlFactors ildlt(const SparseSymMatrix& a, const IldltOptions& options);
BlockLdlFactors ildlt(const SparseSymMatrix& a, std::size_t fill_level, double drop_tol);

/// Replaces every block of D by its absolute value (same eigenvectors,
/// eigenvalue magnitudes), so L |D| L^T is positive definite.
BlockLdlFactors modify_block_diagonal(const BlockLdlFactors& factors);

/// Symmetric matrix B with B = Q diag(|l1|, |l2|) Q for the 2x2 block
/// eigendecomposition [[a, b], [b, c]] = Q diag(l1, l2) Q, Q = [[cs, sn], [sn, -cs]].
struct TwoByTwoEigen {
  double cs = 1.0;
  double sn = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};
TwoByTwoEigen eigen_2x2(double a, double b, double c);

/// Dense P S A S P^T - L D L^T Frobenius norm over Frobenius norm of S A S.
double reconstruction_error(const SparseSymMatrix& a, const BlockLdlFactors& f);

class LdlPreconditioner final : public PreconditionerAction {
 public:
  LdlPreconditioner(BlockLdlFactors factors, std::string label);

  const BlockLdlFactors& factors() const noexcept { return factors_; }
  std::size_t size() const override { return factors_.n(); }
  void apply(std::span<const double> x, std::span<double> y) const override;
  std::string label() const override { return label_; }

 private:
  BlockLdlFactors factors_;
  std::string label_;
};

/// Fill-reducing symmetric ordering; returns perm with perm[new] = old.
std::vector<std::size_t> minimum_degree_order(const CsrMatrix& pattern);

// ---------------------------------------------------------------------------
// Deflation

/// M_mr = A + 2 V |Lambda| V^T, applied matrix-free.
class DeflatedOperator final : public LinearOperator {
 public:
  DeflatedOperator(const SparseSymMatrix& a, const DeflationBasis& basis);

  std::size_t size() const override { return a_.n(); }
  void apply(std::span<const double> u, std::span<double> y) const override;

 private:
  const SparseSymMatrix& a_;
  const DeflationBasis& basis_;
  Vector abs_lambda_;
};

Vector deflated_apply(const DeflatedOperator& op, std::span<const double> u);

/// inner(g) - 2 V Lambda^-1 V^T g: the Sherman-Morrison-Woodbury form of
/// M_mr^-1 with inner approximating A^-1.
class SmwInverse final : public PreconditionerAction {
 public:
  SmwInverse(std::shared_ptr<const LinearOperator> inner, const DeflationBasis& basis,
             std::string label = "smw");

  std::size_t size() const override { return inner_->size(); }
  void apply(std::span<const double> g, std::span<double> y) const override;
  std::string label() const override { return label_; }

 private:
  std::shared_ptr<const LinearOperator> inner_;
  const DeflationBasis& basis_;
  Vector inv_lambda_;
  std::string label_;
};

Vector smw_apply(const SmwInverse& s, std::span<const double> g);

// ---------------------------------------------------------------------------
// Spec strings

enum class PrecondKind { None, Ilu0, Milu, Ilut, Ildlt, IldltModified, Smw };

struct PrecondSpec {
  PrecondKind kind = PrecondKind::None;
  double drop_tol = 0.0;
  std::size_t fill_level = 0;
  std::unique_ptr<PrecondSpec> inner;  ///< for smw:<inner-spec>
  std::string text;
};

/// Parses `none`, `ilu0`, `milu:<tol>`, `ilut:<tol>`, `ildlt:<level>:<tol>`,
/// `ildlt-mod:<level>:<tol>` and `smw:<inner-spec>`. Throws SpecError.
PrecondSpec parse_precond_spec(const std::string& text);

/// Builds the preconditioner described by `spec` for A. `smw:` specs need the
/// deflation basis and return the SMW composition; `basis` must outlive the
/// result.
std::shared_ptr<const PreconditionerAction> build_preconditioner(
    const PrecondSpec& spec, const SparseSymMatrix& a,
    const DeflationBasis* basis = nullptr, bool reorder = true,
    bool equilibrate = true);

}  // namespace mrcg
