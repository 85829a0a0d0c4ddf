#include <vector>

#include <benchmark/benchmark.h>

#include "pooltest/dilution.hpp"
#include "pooltest/nt_table.hpp"
#include "pooltest/planners.hpp"
#include "pooltest/rng.hpp"
#include "pooltest/simulator.hpp"

namespace pooltest {
namespace {

PlannerConfig planner(Algorithm a, int n, int d, double alpha = 0.0) {
  PlannerConfig c;
  c.algorithm = a;
  c.n = n;
  c.d = d;
  c.alpha = alpha;
  return c;
}

void BM_NtBuildTable(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(nt_build_table(0.05, n).cost(0, n));
  state.SetComplexityN(n);
}
BENCHMARK(BM_NtBuildTable)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed)
    ->Unit(benchmark::kMillisecond);

// One ideal-oracle run with a fixed set of infected samples.
void run_planner(benchmark::State& state, Algorithm a, int d, double alpha) {
  const int n = static_cast<int>(state.range(0));
  const auto cfg = planner(a, n, d, alpha);
  std::vector<bool> infected(n, false);
  for (int i = 0; i < std::max(d, 1); ++i) infected[(i * 7919) % n] = true;
  for (auto _ : state) benchmark::DoNotOptimize(ideal_trace(cfg, infected).tests);
}

void BM_GbsRun(benchmark::State& state) { run_planner(state, Algorithm::kGbs, 4, 0.0); }
void BM_MstRun(benchmark::State& state) { run_planner(state, Algorithm::kMst, 4, 0.0); }
void BM_NtRun(benchmark::State& state) { run_planner(state, Algorithm::kNt, 0, 0.05); }
BENCHMARK(BM_GbsRun)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_MstRun)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_NtRun)->Arg(32)->Arg(128)->Arg(256);

void BM_SimulateNt(benchmark::State& state) {
  SimulationRequest rq;
  rq.planner = planner(Algorithm::kNt, 32, 0, 0.1);
  rq.truth = TruthModel::bernoulli(0.1);
  rq.trials = state.range(0);
  rq.seed = 1;
  rq.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(rq).tests.mean);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateNt)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SimulateNoisyMst(benchmark::State& state) {
  SimulationRequest rq;
  rq.planner = planner(Algorithm::kMst, 64, 3);
  rq.truth = TruthModel::fixed(3);
  TestKitProfile kit;
  kit.v50 = 100.0;
  kit.v95 = 1000.0;
  kit.beta = 0.01;
  rq.oracle = OutcomeOracle::noisy(kit);
  rq.replication = {2, ReplicationMode::kNegativesOnly};
  rq.trials = state.range(0);
  rq.seed = 1;
  rq.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(rq).sensitivity);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateNoisyMst)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ExhaustiveGbs(benchmark::State& state) {
  const auto cfg = planner(Algorithm::kGbs, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(exhaustive_sweep(cfg).worst_case);
}
BENCHMARK(BM_ExhaustiveGbs)->Arg(12)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Philox(benchmark::State& state) {
  const TrialStream s(42, 0, 1);
  std::uint32_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s.uniform(i++));
}
BENCHMARK(BM_Philox);

void BM_LambertW(benchmark::State& state) {
  double x = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambert_w0(x));
    x = x < 1e9 ? x * 1.001 : 1.0;
  }
}
BENCHMARK(BM_LambertW);

}  // namespace
}  // namespace pooltest

BENCHMARK_MAIN();
