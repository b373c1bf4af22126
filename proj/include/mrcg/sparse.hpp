#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mrcg/operator.hpp"

namespace mrcg {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

enum class Duplicates { Sum, Reject };

/// General compressed sparse row matrix. Column indices are strictly
/// increasing within each row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols,
            std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values);

  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<Triplet> triplets,
                                 Duplicates policy = Duplicates::Sum);
  static CsrMatrix identity(std::size_t n);
  static CsrMatrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return cols_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Stored value at (i, j) or 0.
  double at(std::size_t i, std::size_t j) const;

  void apply(std::span<const double> x, std::span<double> y) const;
  Vector multiply(std::span<const double> x) const;

  double frobenius_norm() const;
  double max_abs() const;
  CsrMatrix transpose() const;
  std::vector<Triplet> triplets() const;

  /// max |a_ij - s a_ji| <= tol * max|a| with s = +1 (symmetric) or -1.
  bool is_symmetric(double rel_tol = 0.0) const;
  bool is_skew_symmetric(double rel_tol = 0.0) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> cols_idx_;
  std::vector<double> values_;
};

/// alpha A + beta B on the union pattern.
CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b);
CsrMatrix scaled(double alpha, const CsrMatrix& a);
/// [[a, b], [c, d]] for square blocks of equal size; an empty CsrMatrix
/// stands for a zero block.
CsrMatrix block2x2(std::size_t n, const CsrMatrix& a, const CsrMatrix& b,
                   const CsrMatrix& c, const CsrMatrix& d);

/// Real symmetric matrix in CSR with the full pattern stored. Construction
/// verifies exact pattern and value symmetry.
class SparseSymMatrix final : public LinearOperator {
 public:
  SparseSymMatrix() = default;
  explicit SparseSymMatrix(CsrMatrix full);

  /// Builds from lower (or upper) triangle entries; off-diagonals are
  /// mirrored once.
  static SparseSymMatrix from_triangle(std::size_t n,
                                       const std::vector<Triplet>& entries,
                                       Duplicates policy = Duplicates::Sum);

  std::size_t n() const noexcept { return csr_.rows(); }
  std::size_t size() const override { return csr_.rows(); }
  std::size_t nnz() const noexcept { return csr_.nnz(); }
  /// Entries in the lower triangle including the diagonal.
  std::size_t nnz_triangle() const noexcept;

  const CsrMatrix& csr() const noexcept { return csr_; }
  double frobenius_norm() const { return csr_.frobenius_norm(); }
  double at(std::size_t i, std::size_t j) const { return csr_.at(i, j); }

  void apply(std::span<const double> x, std::span<double> y) const override;

  /// A - sigma I
  SparseSymMatrix shifted(double sigma) const;

 private:
  CsrMatrix csr_;
};

/// y = A x; throws DimensionError on mismatch.
Vector matvec(const SparseSymMatrix& a, std::span<const double> x);

/// Column-major n x k dense block with n >= k.
class DenseColumnBlock {
 public:
  DenseColumnBlock() = default;
  DenseColumnBlock(std::size_t rows, std::size_t cols);
  DenseColumnBlock(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[j * rows_ + i];
  }

  std::span<double> column(std::size_t j) {
    return std::span<double>(data_).subspan(j * rows_, rows_);
  }
  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(data_).subspan(j * rows_, rows_);
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// V diag(scale) V^T x.
Vector dense_block_apply(const DenseColumnBlock& v, std::span<const double> scale,
                         std::span<const double> x);

/// Throws InvalidArgument if any entry is NaN or infinite.
void require_finite(std::span<const double> x, const char* what);

}  // namespace mrcg
