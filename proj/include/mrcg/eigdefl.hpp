#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "mrcg/error.hpp"
#include "mrcg/sparse.hpp"

namespace mrcg {

struct BlockLdlFactors;

/// Orthonormal approximate invariant subspace for the negative eigenvalues
/// of a symmetric matrix.
struct DeflationBasis {
  DenseColumnBlock vectors;  ///< n x k, orthonormal columns
  Vector lambda;             ///< negative eigenvalues, ascending
  Vector residual_norms;     ///< ||A v_i - lambda_i v_i||_2

  std::size_t k() const noexcept { return lambda.size(); }
  std::size_t n() const noexcept { return vectors.rows(); }

  /// Empty basis (k = 0) for an n-dimensional problem.
  static DeflationBasis empty(std::size_t n);
};

struct EigConfig {
  double eig_tol = 1e-8;
  std::size_t max_lanczos_dim = 300;
  std::size_t dense_threshold = 2000;
  std::optional<std::size_t> k_hint;
  std::uint64_t seed = 0x5EED;
  std::size_t max_restarts = 200;
};

class EigenError : public Error {
 public:
  EigenError(const std::string& what, DeflationBasis partial)
      : Error(what), partial_(std::move(partial)) {}

  /// Eigenpairs that did converge before the failure.
  const DeflationBasis& partial() const noexcept { return partial_; }

 private:
  DeflationBasis partial_;
};

class SingularMatrixError : public Error {
 public:
  explicit SingularMatrixError(double lambda)
      : Error("numerically singular: eigenvalue " + std::to_string(lambda) +
              " is below eig_tol * ||A||_F"),
        lambda_(lambda) {}

  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// All eigenpairs with negative eigenvalue. Uses a dense symmetric
/// eigensolver for n <= dense_threshold, otherwise shift-invert Lanczos at
/// zero with full reorthogonalization and locking.
DeflationBasis negative_eigenpairs(const SparseSymMatrix& a, const EigConfig& cfg = {});

/// ||A V - V diag(lambda)||_F recomputed from scratch.
double basis_residual(const SparseSymMatrix& a, const DeflationBasis& basis);
/// ||V^T V - I||_F
double orthonormality_error(const DeflationBasis& basis);

struct Inertia {
  std::size_t negative = 0;
  std::size_t zero = 0;
  std::size_t positive = 0;

  friend bool operator==(const Inertia&, const Inertia&) = default;
};

/// Eigenvalue sign counts of the block diagonal of a complete factorization.
/// Throws InvalidArgument for incomplete factors.
Inertia inertia_count(const BlockLdlFactors& factors);

/// FNV-1a over dimension, pattern and value bits.
std::uint64_t content_hash(const SparseSymMatrix& a);

/// Binary cache file: magic "MRCGDEFL", u32 version, u64 content hash,
/// f64 eig_tol, u64 n, u64 k, k eigenvalues, n*k column-major vector entries.
/// All little-endian.
void save_basis(const std::filesystem::path& path, const DeflationBasis& basis,
                std::uint64_t hash, double eig_tol);
/// Returns nullopt if the file is missing or was written for a different
/// matrix or tolerance. Residual norms are recomputed against `a`.
std::optional<DeflationBasis> load_basis(const std::filesystem::path& path,
                                         const SparseSymMatrix& a, double eig_tol);

/// Directory-backed basis cache; thread safe.
class BasisCache {
 public:
  explicit BasisCache(std::filesystem::path dir);

  std::shared_ptr<const DeflationBasis> get_or_compute(const SparseSymMatrix& a,
                                                       const EigConfig& cfg);

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const DeflationBasis>> memory_;
};

}  // namespace mrcg
