#include "mrcg/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrcg/error.hpp"
#include "mrcg/kernels.hpp"

namespace mrcg {

const char* to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::Io: return "io error";
    case ParseErrorKind::MalformedHeader: return "malformed header";
    case ParseErrorKind::UnsupportedObject: return "unsupported object";
    case ParseErrorKind::UnsupportedFormat: return "unsupported format";
    case ParseErrorKind::UnsupportedField: return "unsupported field";
    case ParseErrorKind::UnsupportedSymmetry: return "unsupported symmetry";
    case ParseErrorKind::MalformedSize: return "malformed size line";
    case ParseErrorKind::MalformedEntry: return "malformed entry";
    case ParseErrorKind::IndexOutOfRange: return "index out of range";
    case ParseErrorKind::DuplicateEntry: return "duplicate entry";
    case ParseErrorKind::EntryCountMismatch: return "entry count mismatch";
  }
  return "parse error";
}

void IdentityOperator::apply(std::span<const double> x,
                             std::span<double> y) const {
  kernels::copy(x, y);
}

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v))
      throw InvalidArgument(std::string(what) + " contains NaN or Inf");
}

// ---------------------------------------------------------------------------
// CsrMatrix

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols,
                     std::vector<std::size_t> row_offsets,
                     std::vector<std::size_t> col_indices,
                     std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(row_offsets)),
      cols_idx_(std::move(col_indices)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 ||
      offsets_.back() != values_.size() || cols_idx_.size() != values_.size())
    throw DimensionError("inconsistent CSR array sizes");
  for (std::size_t i = 0; i < rows_; ++i) {
    if (offsets_[i] > offsets_[i + 1])
      throw InvalidArgument("CSR row offsets must be nondecreasing");
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      if (cols_idx_[p] >= cols_)
        throw DimensionError("CSR column index out of range");
      if (p > offsets_[i] && cols_idx_[p] <= cols_idx_[p - 1])
        throw InvalidArgument("CSR column indices must strictly increase");
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets,
                                   Duplicates policy) {
  for (const auto& t : triplets)
    if (t.row >= rows || t.col >= cols)
      throw DimensionError("triplet index out of range");
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> colidx;
  std::vector<double> vals;
  colidx.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t p = 0; p < triplets.size(); ++p) {
    const auto& t = triplets[p];
    if (p > 0 && triplets[p - 1].row == t.row && triplets[p - 1].col == t.col) {
      if (policy == Duplicates::Reject)
        throw InvalidArgument("duplicate entry (" + std::to_string(t.row) + ", " +
                              std::to_string(t.col) + ")");
      vals.back() += t.value;
      continue;
    }
    colidx.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
  return CsrMatrix(rows, cols, std::move(offsets), std::move(colidx),
                   std::move(vals));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  const Vector ones(n, 1.0);
  return diagonal(ones);
}

CsrMatrix CsrMatrix::diagonal(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> offsets(n + 1), cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i + 1] = i + 1;
    cols[i] = i;
  }
  return CsrMatrix(n, n, std::move(offsets), std::move(cols),
                   Vector(d.begin(), d.end()));
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = cols_idx_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
  const auto last = cols_idx_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - cols_idx_.begin())];
}

void CsrMatrix::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols_ || y.size() != rows_)
    throw DimensionError("CsrMatrix::apply dimension mismatch");
  kernels::spmv(rows_, offsets_, cols_idx_, values_, x, y);
}

Vector CsrMatrix::multiply(std::span<const double> x) const {
  Vector y(rows_);
  apply(x, y);
  return y;
}

double CsrMatrix::frobenius_norm() const { return kernels::nrm2(values_); }

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<std::size_t> offsets(cols_ + 1, 0);
  for (std::size_t c : cols_idx_) ++offsets[c + 1];
  for (std::size_t j = 0; j < cols_; ++j) offsets[j + 1] += offsets[j];
  std::vector<std::size_t> next(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> colidx(nnz());
  std::vector<double> vals(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      const std::size_t q = next[cols_idx_[p]]++;
      colidx[q] = i;
      vals[q] = values_[p];
    }
  return CsrMatrix(cols_, rows_, std::move(offsets), std::move(colidx),
                   std::move(vals));
}

std::vector<Triplet> CsrMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
      out.push_back({i, cols_idx_[p], values_[p]});
  return out;
}

namespace {

bool symmetric_with_sign(const CsrMatrix& a, double sign, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double tol = rel_tol * a.max_abs();
  const CsrMatrix t = a.transpose();
  // Compare a against sign * a^T on the union pattern.
  const CsrMatrix diff = add(1.0, a, -sign, t);
  for (double v : diff.values())
    if (std::abs(v) > tol) return false;
  if (rel_tol == 0.0) {
    // Exact comparison also requires identical patterns.
    if (a.nnz() != t.nnz()) return false;
    for (std::size_t i = 0; i <= a.rows(); ++i)
      if (a.row_offsets()[i] != t.row_offsets()[i]) return false;
    for (std::size_t p = 0; p < a.nnz(); ++p)
      if (a.col_indices()[p] != t.col_indices()[p]) return false;
  }
  return true;
}

}  // namespace

bool CsrMatrix::is_symmetric(double rel_tol) const {
  return symmetric_with_sign(*this, 1.0, rel_tol);
}

bool CsrMatrix::is_skew_symmetric(double rel_tol) const {
  return symmetric_with_sign(*this, -1.0, rel_tol);
}

CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("add: dimension mismatch");
  std::vector<std::size_t> offsets(a.rows() + 1, 0);
  std::vector<std::size_t> colidx;
  std::vector<double> vals;
  colidx.reserve(a.nnz() + b.nnz());
  vals.reserve(a.nnz() + b.nnz());
  const auto ao = a.row_offsets(), bo = b.row_offsets();
  const auto ac = a.col_indices(), bc = b.col_indices();
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::size_t p = ao[i], q = bo[i];
    while (p < ao[i + 1] || q < bo[i + 1]) {
      if (q >= bo[i + 1] || (p < ao[i + 1] && ac[p] < bc[q])) {
        colidx.push_back(ac[p]);
        vals.push_back(alpha * av[p]);
        ++p;
      } else if (p >= ao[i + 1] || bc[q] < ac[p]) {
        colidx.push_back(bc[q]);
        vals.push_back(beta * bv[q]);
        ++q;
      } else {
        colidx.push_back(ac[p]);
        vals.push_back(alpha * av[p] + beta * bv[q]);
        ++p;
        ++q;
      }
    }
    offsets[i + 1] = colidx.size();
  }
  return CsrMatrix(a.rows(), a.cols(), std::move(offsets), std::move(colidx),
                   std::move(vals));
}

CsrMatrix scaled(double alpha, const CsrMatrix& a) {
  Vector vals(a.values().begin(), a.values().end());
  for (double& v : vals) v *= alpha;
  return CsrMatrix(a.rows(), a.cols(),
                   {a.row_offsets().begin(), a.row_offsets().end()},
                   {a.col_indices().begin(), a.col_indices().end()},
                   std::move(vals));
}

CsrMatrix block2x2(std::size_t n, const CsrMatrix& a, const CsrMatrix& b,
                   const CsrMatrix& c, const CsrMatrix& d) {
  std::vector<Triplet> t;
  auto put = [&](const CsrMatrix& m, std::size_t r0, std::size_t c0) {
    if (m.rows() == 0) return;
    if (m.rows() != n || m.cols() != n)
      throw DimensionError("block2x2: block dimension mismatch");
    for (const auto& e : m.triplets()) t.push_back({e.row + r0, e.col + c0, e.value});
  };
  put(a, 0, 0);
  put(b, 0, n);
  put(c, n, 0);
  put(d, n, n);
  return CsrMatrix::from_triplets(2 * n, 2 * n, std::move(t));
}

// ---------------------------------------------------------------------------
// SparseSymMatrix

SparseSymMatrix::SparseSymMatrix(CsrMatrix full) : csr_(std::move(full)) {
  if (csr_.rows() != csr_.cols())
    throw DimensionError("symmetric matrix must be square");
  if (!csr_.is_symmetric(0.0))
    throw InvalidArgument("matrix pattern or values are not symmetric");
  require_finite(csr_.values(), "matrix");
}

SparseSymMatrix SparseSymMatrix::from_triangle(std::size_t n,
                                               const std::vector<Triplet>& entries,
                                               Duplicates policy) {
  std::vector<Triplet> full;
  full.reserve(2 * entries.size());
  for (const auto& e : entries) {
    full.push_back(e);
    if (e.row != e.col) full.push_back({e.col, e.row, e.value});
  }
  return SparseSymMatrix(CsrMatrix::from_triplets(n, n, std::move(full), policy));
}

std::size_t SparseSymMatrix::nnz_triangle() const noexcept {
  std::size_t count = 0;
  const auto offsets = csr_.row_offsets();
  const auto cols = csr_.col_indices();
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t p = offsets[i]; p < offsets[i + 1] && cols[p] <= i; ++p)
      ++count;
  return count;
}

void SparseSymMatrix::apply(std::span<const double> x, std::span<double> y) const {
  csr_.apply(x, y);
}

SparseSymMatrix SparseSymMatrix::shifted(double sigma) const {
  if (sigma == 0.0) return *this;
  return SparseSymMatrix(add(1.0, csr_, -sigma, CsrMatrix::identity(n())));
}

Vector matvec(const SparseSymMatrix& a, std::span<const double> x) {
  if (x.size() != a.n())
    throw DimensionError("matvec: vector length " + std::to_string(x.size()) +
                         " does not match dimension " + std::to_string(a.n()));
  Vector y(a.n());
  a.apply(x, y);
  return y;
}

// ---------------------------------------------------------------------------
// DenseColumnBlock

DenseColumnBlock::DenseColumnBlock(std::size_t rows, std::size_t cols)
    : DenseColumnBlock(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

DenseColumnBlock::DenseColumnBlock(std::size_t rows, std::size_t cols,
                                   std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (cols_ > rows_) throw DimensionError("dense block needs rows >= cols");
  if (data_.size() != rows_ * cols_)
    throw DimensionError("dense block data size mismatch");
}

Vector dense_block_apply(const DenseColumnBlock& v, std::span<const double> scale,
                         std::span<const double> x) {
  if (x.size() != v.rows())
    throw DimensionError("dense_block_apply: vector length mismatch");
  if (scale.size() != v.cols())
    throw DimensionError("dense_block_apply: scale length mismatch");
  Vector y(v.rows(), 0.0);
  kernels::dense_block_apply(v.rows(), v.cols(), v.data(), scale, x, y);
  return y;
}

}  // namespace mrcg
