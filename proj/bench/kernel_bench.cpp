// Serial reference kernels against the OpenMP versions.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mrcg/kernels.hpp"
#include "mrcg/rng.hpp"
#include "mrcg/sparse.hpp"

namespace k = mrcg::kernels;

namespace {

// 5-point Laplacian on a side x side grid, shifted to be indefinite.
mrcg::CsrMatrix laplacian(std::size_t side) {
  std::vector<mrcg::Triplet> t;
  const std::size_t n = side * side;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      const std::size_t r = i * side + j;
      t.push_back({r, r, 4.0 - 0.5});
      if (i > 0) t.push_back({r, r - side, -1.0});
      if (i + 1 < side) t.push_back({r, r + side, -1.0});
      if (j > 0) t.push_back({r, r - 1, -1.0});
      if (j + 1 < side) t.push_back({r, r + 1, -1.0});
    }
  return mrcg::CsrMatrix::from_triplets(n, n, std::move(t));
}

template <bool Parallel>
void BM_dot(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = mrcg::random_vector(n, 1), y = mrcg::random_vector(n, 2);
  for (auto _ : state) {
    const double d = Parallel ? k::dot(x, y) : k::serial::dot(x, y);
    benchmark::DoNotOptimize(d);
  }
  state.SetBytesProcessed(int64_t(state.iterations()) * int64_t(2 * n * sizeof(double)));
}

template <bool Parallel>
void BM_spmv(benchmark::State& state) {
  const auto a = laplacian(static_cast<std::size_t>(state.range(0)));
  const auto x = mrcg::random_vector(a.rows(), 3);
  std::vector<double> y(a.rows());
  for (auto _ : state) {
    if (Parallel)
      k::spmv(a.rows(), a.row_offsets(), a.col_indices(), a.values(), x, y);
    else
      k::serial::spmv(a.rows(), a.row_offsets(), a.col_indices(), a.values(), x, y);
    benchmark::ClobberMemory();
  }
  state.counters["nnz"] = double(a.nnz());
}

template <bool Parallel>
void BM_dense_block_apply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto v = mrcg::random_vector(n * kk, 4), s = mrcg::random_vector(kk, 5);
  const auto x = mrcg::random_vector(n, 6);
  std::vector<double> y(n);
  for (auto _ : state) {
    if (Parallel)
      k::dense_block_apply(n, kk, v, s, x, y);
    else
      k::serial::dense_block_apply(n, kk, v, s, x, y);
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(BM_dot<false>)->Name("dot/serial")->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_dot<true>)->Name("dot/openmp")->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_spmv<false>)->Name("spmv/serial")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_spmv<true>)->Name("spmv/openmp")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_dense_block_apply<false>)
    ->Name("dense_block_apply/serial")
    ->Args({20000, 8})
    ->Args({20000, 54})
    ->Args({200000, 54});
BENCHMARK(BM_dense_block_apply<true>)
    ->Name("dense_block_apply/openmp")
    ->Args({20000, 8})
    ->Args({20000, 54})
    ->Args({200000, 54});

BENCHMARK_MAIN();
