// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "ntklab/linalg.hpp"
#include "ntklab/rng.hpp"

namespace {

ntklab::Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  ntklab::CounterRng rng(seed);
  ntklab::Mat m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n, n, 1), b = random_mat(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::serial::matmul(a, b));
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n, n, 1), b = random_mat(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::matmul(a, b));
}

// N x P Jacobian-shaped input.
void BM_GramSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto j = random_mat(n, 16 * n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::serial::gram(j));
}

void BM_GramParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto j = random_mat(n, 16 * n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::gram(j));
}

void BM_KhatriRaoSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n, 32, 4), b = random_mat(n, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::serial::khatri_rao(a, b));
}

void BM_KhatriRaoParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n, 32, 4), b = random_mat(n, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ntklab::khatri_rao(a, b));
}

}  // namespace

BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_MatmulParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_GramSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_GramParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_KhatriRaoSerial)->Arg(64)->Arg(512);
BENCHMARK(BM_KhatriRaoParallel)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
