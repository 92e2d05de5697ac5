// Parallel kernels against their serial references.

#include "ew/exact_ew.hpp"
#include "ew/gibbs_ew.hpp"
#include "ew/harness.hpp"

#include <benchmark/benchmark.h>

using namespace ew;

namespace {

DesignSample bench_sample(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix phi(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) phi(i, j) = rng.normal();
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = phi(i, 0) - 0.5 * phi(i, 1) + rng.normal();
  return DesignSample(phi, y);
}

ExactEWConfig exact_config(int n, int kmax) {
  ExactEWConfig cfg;
  cfg.sigma2 = 1.0;
  cfg.lambda = default_temperature_exact(n, 1.0);
  cfg.kmax = kmax;
  return cfg;
}

void BM_AggregateExact(benchmark::State& state) {
  const DesignSample s = bench_sample(60, static_cast<int>(state.range(0)), 1);
  const ExactEWConfig cfg = exact_config(60, 3);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_exact(s, cfg).theta);
}

void BM_AggregateExactSerial(benchmark::State& state) {
  const DesignSample s = bench_sample(60, static_cast<int>(state.range(0)), 1);
  const ExactEWConfig cfg = exact_config(60, 3);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_exact_serial(s, cfg).theta);
}

GibbsConfig gibbs_config(int chains) {
  GibbsConfig cfg;
  cfg.lambda = 5.0;
  cfg.chain_length = 20'000;
  cfg.burn_in = 2'000;
  cfg.chains = chains;
  cfg.step_size = default_step_size(cfg.K, 30);
  return cfg;
}

void BM_GibbsEstimate(benchmark::State& state) {
  const DesignSample s = bench_sample(100, 30, 2);
  const GibbsConfig cfg = gibbs_config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gibbs_estimate(s, cfg).theta);
}

void BM_GibbsEstimateSerial(benchmark::State& state) {
  const DesignSample s = bench_sample(100, 30, 2);
  const GibbsConfig cfg = gibbs_config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gibbs_estimate_serial(s, cfg).theta);
}

Scenario bench_scenario() {
  Scenario s;
  s.n = 50;
  s.p = 12;
  s.theta_star = CoefVector::Zero(12);
  s.theta_star.head(2).setOnes();
  return s;
}

void BM_Replications(benchmark::State& state) {
  EstimatorSpec est;
  est.exact = exact_config(50, 2);
  const Scenario s = bench_scenario();
  for (auto _ : state) benchmark::DoNotOptimize(run_replications(est, s, 32, 1, 0.0).mean);
}

void BM_ReplicationsSerial(benchmark::State& state) {
  EstimatorSpec est;
  est.exact = exact_config(50, 2);
  const Scenario s = bench_scenario();
  for (auto _ : state) benchmark::DoNotOptimize(run_replications_serial(est, s, 32, 1, 0.0).mean);
}

}  // namespace

BENCHMARK(BM_AggregateExact)->Arg(15)->Arg(25)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AggregateExactSerial)->Arg(15)->Arg(25)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GibbsEstimate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GibbsEstimateSerial)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replications)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicationsSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
