#include "mrcg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace mrcg::kernels {

namespace {

std::size_t chunk_count(std::size_t n) {
  return (n + kReductionChunk - 1) / kReductionChunk;
}

// Sums f(i) over [0, n) with a thread-count independent order.
template <class Term>
double chunked_sum(std::size_t n, Term term) {
  const std::size_t chunks = chunk_count(n);
  if (chunks <= 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += term(i);
    return s;
  }
  std::vector<double> partial(chunks, 0.0);
  const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

int max_threads() noexcept {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads_for_this_thread(int threads) noexcept {
#if defined(_OPENMP)
  omp_set_num_threads(std::max(1, threads));
#else
  (void)threads;
#endif
}

double dot(std::span<const double> x, std::span<const double> y) {
  return chunked_sum(x.size(), [&](std::size_t i) { return x[i] * y[i]; });
}

double nrm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void xpby(std::span<const double> x, double b, std::span<double> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = x[i] + b * y[i];
}

void scale(double a, std::span<double> x) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) x[i] *= a;
}

void copy(std::span<const double> x, std::span<double> y) {
  std::copy(x.begin(), x.end(), y.begin());
}

void fill(std::span<double> x, double value) {
  std::fill(x.begin(), x.end(), value);
}

void spmv(std::size_t rows, std::span<const std::size_t> row_offsets,
          std::span<const std::size_t> col_indices,
          std::span<const double> values, std::span<const double> x,
          std::span<double> y) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nrows; ++i) {
    double sum = 0.0;
    for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
      sum += values[p] * x[col_indices[p]];
    y[i] = sum;
  }
}

void gemv_t(std::size_t n, std::size_t k, std::span<const double> v,
            std::span<const double> x, std::span<double> out) {
  for (std::size_t j = 0; j < k; ++j)
    out[j] = dot(v.subspan(j * n, n), x.first(n));
}

void gemv_acc(std::size_t n, std::size_t k, std::span<const double> v,
              std::span<const double> c, std::span<double> y) {
  const auto nrows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nrows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      sum += v[j * n + static_cast<std::size_t>(i)] * c[j];
    y[i] += sum;
  }
}

void dense_block_apply(std::size_t n, std::size_t k, std::span<const double> v,
                       std::span<const double> s, std::span<const double> x,
                       std::span<double> y) {
  std::vector<double> t(k);
  gemv_t(n, k, v, x, t);
  for (std::size_t j = 0; j < k; ++j) t[j] *= s[j];
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  gemv_acc(n, k, v, t, y);
}

namespace serial {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double nrm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void spmv(std::size_t rows, std::span<const std::size_t> row_offsets,
          std::span<const std::size_t> col_indices,
          std::span<const double> values, std::span<const double> x,
          std::span<double> y) {
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
      sum += values[p] * x[col_indices[p]];
    y[i] = sum;
  }
}

void dense_block_apply(std::size_t n, std::size_t k, std::span<const double> v,
                       std::span<const double> s, std::span<const double> x,
                       std::span<double> y) {
  std::vector<double> t(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += v[j * n + i] * x[i];
    t[j] = d * s[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += v[j * n + i] * t[j];
    y[i] = sum;
  }
}

}  // namespace serial

}  // namespace mrcg::kernels
