#pragma once

// Shared oracles and generators for the unit tests. Dense Eigen
// computations serve as the independent reference throughout.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "mrcg/eigdefl.hpp"
#include "mrcg/operator.hpp"
#include "mrcg/sparse.hpp"

namespace testing {

using mrcg::CsrMatrix;
using mrcg::SparseSymMatrix;
using mrcg::Vector;

// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>()(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  Vector vector(std::size_t n) {
    Vector v(n);
    for (double& x : v) x = normal();
    return v;
  }
  Eigen::MatrixXd gaussian(std::size_t r, std::size_t c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal();
    return m;
  }
  Eigen::MatrixXd orthogonal(std::size_t n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, n));
    return qr.householderQ();
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline Eigen::MatrixXd dense(const CsrMatrix& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.rows()),
                                            static_cast<Eigen::Index>(a.cols()));
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = off[i]; p < off[i + 1]; ++p)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col[p])) += val[p];
  return d;
}
inline Eigen::MatrixXd dense(const SparseSymMatrix& a) { return dense(a.csr()); }

inline CsrMatrix csr(const Eigen::MatrixXd& d) {
  std::vector<mrcg::Triplet> t;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0 || i == j)
        t.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), d(i, j)});
  return CsrMatrix::from_triplets(static_cast<std::size_t>(d.rows()),
                                  static_cast<std::size_t>(d.cols()), std::move(t));
}

// Exactly symmetric copy of a dense matrix.
inline SparseSymMatrix sym(const Eigen::MatrixXd& d) {
  const Eigen::MatrixXd s = 0.5 * (d + d.transpose());
  return SparseSymMatrix(csr(s));
}

inline Eigen::VectorXd ev(const Vector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline Vector sv(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

inline double rel_err(const Vector& a, const Vector& b) {
  return (ev(a) - ev(b)).norm() / std::max(ev(b).norm(), 1e-300);
}

// Symmetric matrix with a planted spectrum: k negative eigenvalues in
// [-hi, -lo] and n - k positive ones in [lo, hi].
struct Planted {
  Eigen::MatrixXd a;
  Eigen::MatrixXd q;       // eigenvectors
  Eigen::VectorXd lambda;  // ascending
  std::size_t k = 0;
};

inline Planted planted(Gen& g, std::size_t n, std::size_t k, double lo = 0.5, double hi = 10.0) {
  Planted p;
  p.k = k;
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = (i < k ? -1.0 : 1.0) * g.uniform(lo, hi);
  std::sort(eig.begin(), eig.end());
  p.lambda = Eigen::Map<Eigen::VectorXd>(eig.data(), static_cast<Eigen::Index>(n));
  p.q = g.orthogonal(n);
  p.a = p.q * p.lambda.asDiagonal() * p.q.transpose();
  p.a = 0.5 * (p.a + p.a.transpose()).eval();
  return p;
}

// Exact negative eigenpairs from the planting construction.
inline mrcg::DeflationBasis planted_basis(const Planted& p) {
  const std::size_t n = static_cast<std::size_t>(p.a.rows());
  mrcg::DeflationBasis b{mrcg::DenseColumnBlock(n, p.k), Vector(p.k), Vector(p.k, 0.0)};
  for (std::size_t j = 0; j < p.k; ++j) {
    b.lambda[j] = p.lambda(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i)
      b.vectors(i, j) = p.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return b;
}

// Dense LU solve wrapped as a preconditioner.
inline std::shared_ptr<mrcg::FunctionOperator> dense_inverse(const Eigen::MatrixXd& a,
                                                             std::string label = "dense-inv") {
  auto lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(a);
  return std::make_shared<mrcg::FunctionOperator>(
      static_cast<std::size_t>(a.rows()),
      [lu](std::span<const double> x, std::span<double> y) {
        const Eigen::VectorXd r =
            lu->solve(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
        std::copy(r.data(), r.data() + r.size(), y.begin());
      },
      std::move(label));
}

// Dense matrix of a linear operator, column by column.
inline Eigen::MatrixXd assemble(const mrcg::LinearOperator& op) {
  const std::size_t n = op.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Vector e(n, 0.0), y(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, y);
    e[j] = 0.0;
    m.col(static_cast<Eigen::Index>(j)) = ev(y);
  }
  return m;
}

// 2D five-point Laplacian on an m x m grid minus shift * I.
inline SparseSymMatrix laplacian2d(std::size_t m, double shift) {
  std::vector<mrcg::Triplet> t;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t r = i * m + j;
      t.push_back({r, r, 4.0 - shift});
      if (j > 0) t.push_back({r, r - 1, -1.0});
      if (i > 0) t.push_back({r, r - m, -1.0});
    }
  return SparseSymMatrix::from_triangle(m * m, t);
}

}  // namespace testing
