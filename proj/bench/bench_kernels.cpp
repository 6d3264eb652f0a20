// Serial reference vs OpenMP kernels, plus the trial runner end to end.

#include "statknn/harness.hpp"
#include "statknn/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace statknn;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = z(rng);
  return m;
}

kernels::Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Execution::Serial : kernels::Execution::Parallel;
}

void BM_squared_distances(benchmark::State& state) {
  const Matrix train = gaussian(state.range(1), 16, 1);
  const Vector q = gaussian(1, 16, 2).row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::squared_distances(q, train, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_squared_distances)->ArgsProduct({{0, 1}, {1000, 100000}});

void BM_loo_kth(benchmark::State& state) {
  const Matrix train = gaussian(state.range(1), 5, 3);
  const std::vector<Index> ks{1, 3, 5};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::loo_kth_sq_distances(train, ks, exec_of(state)));
}
BENCHMARK(BM_loo_kth)->ArgsProduct({{0, 1}, {200, 1000}})->Unit(benchmark::kMillisecond);

void BM_null_trials(benchmark::State& state) {
  harness::SyntheticSpec spec;
  spec.n = 100;
  spec.d = 2;
  spec.trials = 2000;
  spec.seed = 5;
  spec.methods = MethodSet::parse("stat,wopp,naive");
  for (auto _ : state) benchmark::DoNotOptimize(harness::run_null(spec, exec_of(state)));
}
BENCHMARK(BM_null_trials)->ArgsProduct({{0, 1}, {0}})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
