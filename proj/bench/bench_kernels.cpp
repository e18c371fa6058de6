// Serial-reference vs OpenMP comparison for the three data-parallel kernels:
// partition scans, multi-start root finding and family sweeps.

#include <benchmark/benchmark.h>

#include <random>

#include "irm/invariance.hpp"
#include "irm/risk.hpp"
#include "irm/scalar.hpp"

using namespace irm;

namespace {

// Synthetic environments over n labeled points, mass normalized. Random
// conditional means keep the invariance checks honest while letting n grow
// to the 12-point enumeration bound.
std::vector<Environment> synthetic_envs(int n, int count, std::uint64_t seed) {
  OutcomeSpace space;
  for (int i = 0; i < n; ++i) space.x_points.push_back({i});
  space.y_points = {-1.0, 1.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mass(0.2, 1.0);
  std::uniform_real_distribution<double> mean(-0.8, 0.8);
  std::vector<Environment> envs;
  for (int e = 0; e < count; ++e) {
    std::vector<double> pmf(static_cast<std::size_t>(n) * 2);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double m = mass(rng);
      const double mu = mean(rng);
      pmf[static_cast<std::size_t>(i) * 2 + 0] = m * 0.5 * (1.0 - mu);
      pmf[static_cast<std::size_t>(i) * 2 + 1] = m * 0.5 * (1.0 + mu);
      total += m;
    }
    for (double& p : pmf) p /= total;
    envs.push_back(environment_from_pmf(space, pmf, "synthetic"));
  }
  return envs;
}

void bm_partition_scan(benchmark::State& state, Exec exec) {
  const int n = static_cast<int>(state.range(0));
  const auto envs = synthetic_envs(n, 2, 99);
  for (auto _ : state) {
    auto hits = scan_invariant_partitions(envs, 1e-9, exec);
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(bell_number(n)));
}

void bm_multistart(benchmark::State& state, Exec exec) {
  const auto envs = std::vector<Environment>{two_bit_env(0.1, 0.2),
                                             two_bit_env(0.1, 0.25)};
  const Restriction r = state.range(0) == 0 ? Restriction::odd
                                            : Restriction::unrestricted;
  for (auto _ : state) {
    auto set = solve_scalar_invariant(envs, Loss::square, r, 0, exec);
    benchmark::DoNotOptimize(set);
  }
}

void bm_family_sweep(benchmark::State& state, Exec exec) {
  const Predictor f = linear_predictor(three_level_space(), {0.0, 0.3});
  const auto family = EnvironmentFamily::section4();
  const GridSpec grid{static_cast<int>(state.range(0)), 1e-4};
  for (auto _ : state) {
    auto sweep = loss_sweep(f, family, Loss::square, grid, exec);
    benchmark::DoNotOptimize(sweep);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(bm_partition_scan, serial, Exec::serial)
    ->Arg(9)
    ->Arg(11)
    ->Arg(12)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_partition_scan, parallel, Exec::parallel)
    ->Arg(9)
    ->Arg(11)
    ->Arg(12)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_CAPTURE(bm_multistart, serial, Exec::serial)
    ->Arg(0)
    ->Arg(1)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_multistart, parallel, Exec::parallel)
    ->Arg(0)
    ->Arg(1)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_CAPTURE(bm_family_sweep, serial, Exec::serial)
    ->Arg(2001)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_family_sweep, parallel, Exec::parallel)
    ->Arg(2001)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
