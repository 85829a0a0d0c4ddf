#include <cmath>

#include <gtest/gtest.h>

#include "pooltest/errors.hpp"
#include "pooltest/nt_table.hpp"
#include "pooltest/rng.hpp"
#include "pooltest/simulator.hpp"

namespace pooltest {
namespace {

PlannerConfig cfg(Algorithm a, int n, int d, double alpha = 0.0) {
  PlannerConfig c;
  c.algorithm = a;
  c.n = n;
  c.d = d;
  c.alpha = alpha;
  return c;
}

TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, UniformsAreInRangeAndRoughlyFlat) {
  const TrialStream s(42, 7, 1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform(i);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Simulate, GbsEightOneIsAlwaysFour) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kGbs, 8, 1);
  rq.truth = TruthModel::fixed(1);
  rq.trials = 500;
  rq.seed = 3;
  const auto rep = simulate(rq);
  EXPECT_EQ(rep.tests.mean, 4.0);
  EXPECT_EQ(rep.tests.max, 4);
  EXPECT_EQ(rep.sensitivity, 1.0);
  EXPECT_EQ(rep.fpr, 0.0);
  EXPECT_EQ(rep.tests.histogram.size(), 1u);
  EXPECT_EQ(rep.worst_case_label, "observed max (Monte Carlo)");
}

TEST(Simulate, SameSeedSameReportAcrossThreadCounts) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kNt, 24, 0, 0.1);
  rq.truth = TruthModel::bernoulli(0.1);
  rq.oracle = OutcomeOracle::noisy(TestKitProfile{1.02, 6.0, 0.05, 1.0});
  rq.replication = {2, ReplicationMode::kNegativesOnly};
  rq.trials = 3000;
  rq.seed = 99;
  rq.threads = 1;
  const auto one = to_json(simulate(rq)).dump();
  rq.threads = 4;
  const auto four = to_json(simulate(rq)).dump();
  EXPECT_EQ(one, four);
  rq.seed = 100;
  EXPECT_NE(to_json(simulate(rq)).dump(), one);
}

TEST(Simulate, PerfectFixedRateEqualsIdeal) {
  for (const auto& c : {cfg(Algorithm::kGbs, 20, 3), cfg(Algorithm::kMst, 20, 3), cfg(Algorithm::kNt, 20, 0, 0.1)}) {
    SimulationRequest rq;
    rq.planner = c;
    rq.truth = c.algorithm == Algorithm::kNt ? TruthModel::bernoulli(0.1) : TruthModel::fixed(2);
    rq.trials = 1000;
    rq.seed = 5;
    const auto ideal = to_json(simulate(rq)).dump();
    rq.oracle = OutcomeOracle::fixed_rate(0.0, 0.0);
    EXPECT_EQ(to_json(simulate(rq)).dump(), ideal);
  }
}

TEST(Simulate, NtMeanConvergesToTheDpValue) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kNt, 16, 0, 0.05);
  rq.truth = TruthModel::bernoulli(0.05);
  rq.trials = 100000;
  rq.seed = 42;
  const auto rep = simulate(rq);
  const double g = nt_average_tests(0.05, 16);
  EXPECT_LE(std::abs(rep.tests.mean - g), 3.0 * rep.tests.std / std::sqrt(100000.0));
  EXPECT_LE(std::abs(rep.tests.mean - g) / g, 0.01);
  EXPECT_EQ(rep.sensitivity, 1.0);
}

TEST(Simulate, ConventionalTestingMatchesReplicationFormulas) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kIndividual, 10, 0);
  rq.truth = TruthModel::bernoulli(0.3);
  rq.oracle = OutcomeOracle::fixed_rate(0.05, 0.1);
  rq.replication = {2, ReplicationMode::kNegativesOnly};
  rq.trials = 20000;
  rq.seed = 8;
  const auto rep = simulate(rq);
  const double sens = 1.0 - gamma_r(0.05, 2);
  const double fpr = beta_r(0.1, 2);
  EXPECT_LE(std::abs(rep.sensitivity - sens), 3.0 * std::sqrt(sens * (1 - sens) / rep.infected));
  EXPECT_LE(std::abs(rep.fpr - fpr), 3.0 * std::sqrt(fpr * (1 - fpr) / rep.uninfected));
}

TEST(Simulate, DilutionLowersSensitivity) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kGbs, 64, 2);
  rq.truth = TruthModel::fixed(2);
  rq.truth.vp_min = rq.truth.vp_max = 500.0;
  rq.oracle = OutcomeOracle::noisy(TestKitProfile{10.0, 100.0, 0.0, 1.0});
  rq.trials = 2000;
  rq.seed = 1;
  const auto small_pools = simulate(rq);
  EXPECT_LT(small_pools.sensitivity, 1.0);
  rq.truth.vp_min = rq.truth.vp_max = 1e6;
  EXPECT_GT(simulate(rq).sensitivity, small_pools.sensitivity);
}

TEST(Simulate, PlannerFailuresAreCounted) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kMst, 32, 1);
  rq.truth = TruthModel::fixed(4);
  rq.trials = 200;
  rq.seed = 2;
  const auto rep = simulate(rq);
  EXPECT_GT(rep.planner_failures, 0);
  EXPECT_EQ(rep.sensitivity, 1.0);
}

TEST(Simulate, Errors) {
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kGbs, 8, 1);
  rq.truth = TruthModel::fixed(1);
  EXPECT_THROW(simulate(rq), ConfigurationError);  // no trials
  rq.trials = 10;
  rq.truth = TruthModel::fixed(9);
  EXPECT_THROW(simulate(rq), ConfigurationError);
  rq.truth = TruthModel::fixed(1);
  rq.planner.d = 8;
  EXPECT_THROW(simulate(rq), ConfigurationError);
}

TEST(Exhaustive, GbsEightOne) {
  const auto rep = exhaustive_sweep(cfg(Algorithm::kGbs, 8, 1));
  EXPECT_EQ(rep.worst_case, 4);
  EXPECT_EQ(rep.expected_tests, 4.0);
  EXPECT_EQ(rep.patterns, 9);
  EXPECT_TRUE(rep.all_correct);
  EXPECT_EQ(rep.worst_case_label, "exact (exhaustive)");
}

TEST(Exhaustive, MstSixteenOne) {
  const auto rep = exhaustive_sweep(cfg(Algorithm::kMst, 16, 1));
  EXPECT_LE(rep.worst_case, 8);
  EXPECT_LE(rep.worst_case, 16);
  EXPECT_EQ(rep.worst_case, mst_worst_case_tests(16, 1));
  EXPECT_TRUE(rep.all_correct);
  EXPECT_EQ(rep.max_queries_per_sample, 3);
}

TEST(Exhaustive, NtExpectationIsTheDpValue) {
  for (double alpha : {0.05, 0.1, 0.3, 0.5}) {
    for (int n = 1; n <= 10; ++n) {
      const auto rep = exhaustive_sweep(cfg(Algorithm::kNt, n, 0, alpha));
      EXPECT_NEAR(rep.expected_tests, nt_average_tests(alpha, n), 1e-9) << alpha << " " << n;
      EXPECT_EQ(rep.detection_probability, 1.0);
      EXPECT_TRUE(rep.all_correct);
    }
  }
}

TEST(Exhaustive, CertificateReachesTheWorstCase) {
  const auto c = cfg(Algorithm::kGbs, 12, 3);
  const auto rep = exhaustive_sweep(c);
  std::vector<bool> pattern(12, false);
  for (SampleId i : rep.certificate) pattern[i] = true;
  EXPECT_EQ(ideal_trace(c, pattern).tests, rep.worst_case);
}

TEST(Exhaustive, CapIsEnforced) {
  EXPECT_THROW(exhaustive_sweep(cfg(Algorithm::kGbs, 21, 1)), ConfigurationError);
}

TEST(Output, HistogramCsvAndNumberFormat) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_number(123456789012.0), "1.23456789e+11");
  SimulationRequest rq;
  rq.planner = cfg(Algorithm::kGbs, 8, 1);
  rq.truth = TruthModel::fixed(1);
  rq.trials = 10;
  rq.seed = 1;
  EXPECT_EQ(histogram_csv(simulate(rq)), "tests,trials,fraction\n4,10,1\n");
}

}  // namespace
}  // namespace pooltest
