// Serial reference vs OpenMP kernels on model-sized batches.
//   ./bench_kernels --benchmark_filter=Forward

#include <benchmark/benchmark.h>

#include <random>

#include "mmu/kernels.hpp"

namespace k = mmu::kernels;
using mmu::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.data) v = n(rng);
  return m;
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 32, 1), w = random_matrix(32, 32, 2);
  const std::vector<double> b(32, 0.1);
  Matrix y;
  for (auto _ : state) {
    if constexpr (Parallel) k::dense_forward(x, w, b, y);
    else k::serial::dense_forward(x, w, b, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_BackwardParams(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix dy = random_matrix(n, 32, 3), x = random_matrix(n, 32, 4);
  Matrix dw(32, 32);
  std::vector<double> db(32);
  for (auto _ : state) {
    if constexpr (Parallel) k::dense_backward_params(dy, x, dw, db);
    else k::serial::dense_backward_params(dy, x, dw, db);
    benchmark::DoNotOptimize(dw.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix dy = random_matrix(n, 32, 5), w = random_matrix(32, 32, 6);
  Matrix dx;
  for (auto _ : state) {
    if constexpr (Parallel) k::dense_backward_input(dy, w, dx);
    else k::serial::dense_backward_input(dy, w, dx);
    benchmark::DoNotOptimize(dx.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Tanh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix src = random_matrix(n, 32, 7);
  for (auto _ : state) {
    Matrix y = src;
    if constexpr (Parallel) k::tanh_inplace(y);
    else k::serial::tanh_inplace(y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Name("Forward/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_Forward<true>)->Name("Forward/openmp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_BackwardParams<false>)->Name("BackwardParams/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_BackwardParams<true>)->Name("BackwardParams/openmp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_BackwardInput<false>)->Name("BackwardInput/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_BackwardInput<true>)->Name("BackwardInput/openmp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_Tanh<false>)->Name("Tanh/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_Tanh<true>)->Name("Tanh/openmp")->RangeMultiplier(4)->Range(64, 4096);

BENCHMARK_MAIN();
