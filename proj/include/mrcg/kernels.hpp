#pragma once

// Vector and sparse kernels.
//
// mrcg::kernels holds the OpenMP versions used by every solver.
// mrcg::kernels::serial holds straightforward single-loop references used by
// the tests and the benchmark.
//
// Reductions in the parallel path are computed over fixed chunks of
// kReductionChunk entries whose partial sums are added in chunk order, so the
// result does not depend on the number of threads. The serial reference sums
// strictly left to right and may differ from the parallel result in the last
// few bits.

#include <cstddef>
#include <span>

namespace mrcg::kernels {

inline constexpr std::size_t kReductionChunk = 2048;

/// Number of OpenMP threads the kernels will use (1 without OpenMP).
int max_threads() noexcept;
/// Thread count for kernels called later from the calling thread only. Worker
/// pools set 1 so they do not oversubscribe.
void set_threads_for_this_thread(int threads) noexcept;

double dot(std::span<const double> x, std::span<const double> y);
double nrm2(std::span<const double> x);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
/// y = x + b * y
void xpby(std::span<const double> x, double b, std::span<double> y);
/// x *= a
void scale(double a, std::span<double> x);
void copy(std::span<const double> x, std::span<double> y);
void fill(std::span<double> x, double value);

/// y = A x for CSR arrays. Each row is summed left to right.
void spmv(std::size_t rows, std::span<const std::size_t> row_offsets,
          std::span<const std::size_t> col_indices,
          std::span<const double> values, std::span<const double> x,
          std::span<double> y);

/// out = V^T x for a column-major n x k block.
void gemv_t(std::size_t n, std::size_t k, std::span<const double> v,
            std::span<const double> x, std::span<double> out);
/// y += V c for a column-major n x k block.
void gemv_acc(std::size_t n, std::size_t k, std::span<const double> v,
              std::span<const double> c, std::span<double> y);

/// y = V diag(s) V^T x, evaluated as two rank-k passes.
void dense_block_apply(std::size_t n, std::size_t k, std::span<const double> v,
                       std::span<const double> s, std::span<const double> x,
                       std::span<double> y);

namespace serial {

double dot(std::span<const double> x, std::span<const double> y);
double nrm2(std::span<const double> x);
void axpy(double a, std::span<const double> x, std::span<double> y);
void spmv(std::size_t rows, std::span<const std::size_t> row_offsets,
          std::span<const std::size_t> col_indices,
          std::span<const double> values, std::span<const double> x,
          std::span<double> y);
void dense_block_apply(std::size_t n, std::size_t k, std::span<const double> v,
                       std::span<const double> s, std::span<const double> x,
                       std::span<double> y);

}  // namespace serial

}  // namespace mrcg::kernels
