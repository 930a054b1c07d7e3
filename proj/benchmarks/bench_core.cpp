#include <benchmark/benchmark.h>

#include <random>

#include "pagkit/gains.hpp"
#include "pagkit/linops.hpp"
#include "pagkit/median.hpp"
#include "pagkit/pll.hpp"
#include "pagkit/sim.hpp"

using namespace pagkit;

namespace {

Matrix random_stable(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = normal(rng);
  return m - (m.norm() + 1.0) * Matrix::Identity(n, n);
}

void BM_MatrixExponential(benchmark::State& state) {
  const Matrix a = random_stable(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(matrix_exponential(a));
}
BENCHMARK(BM_MatrixExponential)->Arg(2)->Arg(5)->Arg(20);

void BM_GeometricMedian(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix pts(state.range(0), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << normal(rng), 3.0 * normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(geometric_median(pts));
}
BENCHMARK(BM_GeometricMedian)->Arg(1024)->Arg(4096);

void BM_LinearPagPll(benchmark::State& state) {
  const auto sys = pll_system().linear;
  GainOptions opts;
  opts.grid_n = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(linear_pag(sys, InputChannel::kInput, 0.02, opts));
}
BENCHMARK(BM_LinearPagPll)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_SubsystemPagsPll(benchmark::State& state) {
  const auto sys = pll_system().linear;
  for (auto _ : state) benchmark::DoNotOptimize(subsystem_pags(sys, 0.02));
}
BENCHMARK(BM_SubsystemPagsPll)->Unit(benchmark::kMillisecond);

void BM_ClassicalAgSlopePll(benchmark::State& state) {
  const auto sys = pll_system().linear;
  for (auto _ : state) benchmark::DoNotOptimize(classical_ag_slope(sys, InputChannel::kInput));
}
BENCHMARK(BM_ClassicalAgSlopePll);

void BM_PeriodicSteadyStatePll(benchmark::State& state) {
  const auto sys = pll_system(PllParams{}, 0.0, 0.5);
  const auto u = random_harmonic_input(0.02, state.range(0), sys.linear.B.cols(), 5, Composition::kSplit, 0.1, 3);
  const Vector x0 = Vector::Zero(sys.linear.n());
  for (auto _ : state) benchmark::DoNotOptimize(periodic_steady_state(sys, u, x0));
}
BENCHMARK(BM_PeriodicSteadyStatePll)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
