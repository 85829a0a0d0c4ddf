#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "pooltest/errors.hpp"
#include "pooltest/nt_table.hpp"
#include "pooltest/planners.hpp"

namespace pooltest {
namespace {

struct Run {
  std::vector<GroupQuery> queries;
  PlannerState final_state;
};

Run run_ideal(const PlannerConfig& cfg, const std::set<SampleId>& infected) {
  Run out{{}, planner_init(cfg)};
  PlannerState& s = out.final_state;
  while (!s.terminal()) {
    EXPECT_EQ(s.check_invariants(), "");
    std::vector<GroupOutcome> outcomes;
    for (const auto& q : planner_next(s)) {
      out.queries.push_back(q);
      bool positive = false;
      for (SampleId m : q.members) positive = positive || infected.count(m) > 0;
      outcomes.push_back({q.id, positive});
    }
    s = planner_observe(std::move(s), outcomes);
  }
  EXPECT_EQ(s.check_invariants(), "");
  return out;
}

bool diagnosed_exactly(const PlannerState& s, const std::set<SampleId>& infected) {
  const auto pos = s.diagnosed_positive();
  return std::set<SampleId>(pos.begin(), pos.end()) == infected && s.undiagnosed().empty();
}

PlannerConfig make(Algorithm a, int n, int d = 0) {
  PlannerConfig c;
  c.algorithm = a;
  c.n = n;
  c.d = d;
  return c;
}

PlannerConfig gbs(int n, int d) { return make(Algorithm::kGbs, n, d); }
PlannerConfig mst(int n, int d) { return make(Algorithm::kMst, n, d); }
PlannerConfig nt(int n, double alpha) {
  PlannerConfig c = make(Algorithm::kNt, n);
  c.alpha = alpha;
  return c;
}

TEST(Gbs, EightSamplesOneInfectedTakesFourTests) {
  for (SampleId pos = 0; pos < 8; ++pos) {
    const auto r = run_ideal(gbs(8, 1), {pos});
    EXPECT_EQ(r.queries.size(), 4u) << pos;
    EXPECT_TRUE(diagnosed_exactly(r.final_state, {pos}));
  }
}

TEST(Gbs, PositiveWholePoolIsFollowedByTheFirstHalf) {
  auto s = planner_init(gbs(8, 1));
  ASSERT_EQ(s.pending().size(), 1u);
  EXPECT_EQ(s.pending()[0].members.size(), 8u);
  s = planner_observe(std::move(s), std::vector<GroupOutcome>{{0, true}});
  ASSERT_EQ(s.pending().size(), 1u);
  EXPECT_EQ(s.pending()[0].members, (std::vector<SampleId>{0, 1, 2, 3}));
}

TEST(Gbs, BinarySplittingUsesLog2Tests) {
  for (int k = 1; k <= 6; ++k) {
    const int n = 1 << k;
    for (SampleId pos = 0; pos < n; ++pos) {
      const auto r = run_ideal(gbs(n, 1), {pos});
      // One whole-group test, then k halvings.
      EXPECT_EQ(static_cast<int>(r.queries.size()), k + 1) << n << " " << pos;
    }
  }
}

TEST(Gbs, VerifyCatchesAnUnderestimate) {
  PlannerConfig c = gbs(8, 1);
  c.verify = true;
  const auto r = run_ideal(c, {1, 6});
  EXPECT_GE(r.final_state.underestimates(), 1);
  EXPECT_TRUE(diagnosed_exactly(r.final_state, {1, 6}));
}

TEST(Gbs, WithoutVerifyAnUnderestimateMissesSamples) {
  const auto r = run_ideal(gbs(8, 1), {1, 6});
  EXPECT_FALSE(diagnosed_exactly(r.final_state, {1, 6}));
}

TEST(Gbs, ZeroDMeansEveryoneNegative) {
  const auto r = run_ideal(gbs(5, 0), {});
  EXPECT_TRUE(r.queries.empty());
  EXPECT_EQ(r.final_state.diagnosed_negative().size(), 5u);
}

TEST(Mst, SixteenSamplesOneInfected) {
  EXPECT_EQ(mst_optimal_stages(16, 1), 3);
  auto s = planner_init(mst(16, 1));
  ASSERT_EQ(s.pending().size(), 3u);
  EXPECT_EQ(s.pending()[0].members.size(), 6u);
  EXPECT_EQ(s.pending()[1].members.size(), 5u);
  EXPECT_EQ(s.pending()[2].members.size(), 5u);
  for (SampleId pos = 0; pos < 16; ++pos) {
    const auto r = run_ideal(mst(16, 1), {pos});
    EXPECT_TRUE(diagnosed_exactly(r.final_state, {pos}));
    EXPECT_LE(static_cast<int>(r.queries.size()), 8);
    EXPECT_LE(r.final_state.max_queries_per_sample(), 3);
  }
}

TEST(Mst, ReplansWhenTooManyGroupsArePositive) {
  const auto r = run_ideal(mst(16, 1), {0, 7, 12});
  EXPECT_GE(r.final_state.underestimates(), 1);
  EXPECT_TRUE(diagnosed_exactly(r.final_state, {0, 7, 12}));
}

TEST(Mst, StagesMatchBruteForce) {
  for (int n = 2; n <= 64; ++n) {
    for (int d = 1; d < n; ++d) {
      const double delta = static_cast<double>(n) / d;
      int best = 0;
      double best_cost = INFINITY;
      for (int x = 1; x <= 10; ++x) {
        if (x != static_cast<int>(std::floor(std::log(delta))) &&
            x != static_cast<int>(std::ceil(std::log(delta))))
          continue;
        const double cost = x * d * std::pow(delta, 1.0 / x);
        if (cost < best_cost) {
          best_cost = cost;
          best = x;
        }
      }
      if (best == 0) best = 1;
      EXPECT_EQ(mst_optimal_stages(n, d), best) << n << " " << d;
    }
  }
}

TEST(Mst, GroupSizesSplitEvenly) {
  EXPECT_EQ(mst_group_sizes(16, 3), (std::vector<int>{6, 5, 5}));
  EXPECT_EQ(mst_group_sizes(7, 7), (std::vector<int>(7, 1)));
}

TEST(Nt, DetectsEveryPattern) {
  for (unsigned mask = 0; mask < 256; ++mask) {
    std::set<SampleId> infected;
    for (int i = 0; i < 8; ++i)
      if (mask >> i & 1u) infected.insert(i);
    const auto r = run_ideal(nt(8, 0.1), infected);
    EXPECT_TRUE(diagnosed_exactly(r.final_state, infected)) << mask;
  }
}

TEST(Nt, FirstGroupFollowsTheTable) {
  const auto table = nt_build_table(0.05, 16);
  const auto s = planner_init(nt(16, 0.05));
  ASSERT_EQ(s.pending().size(), 1u);
  EXPECT_EQ(static_cast<int>(s.pending()[0].members.size()), table.choice(0, 16));
}

TEST(Individual, OneTestPerSample) {
  PlannerConfig c = make(Algorithm::kIndividual, 5);
  const auto r = run_ideal(c, {2});
  EXPECT_EQ(r.queries.size(), 5u);
  EXPECT_TRUE(diagnosed_exactly(r.final_state, {2}));
}

TEST(Planners, RandomPatternsWithinDAreDiagnosed) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 40)(gen);
    const int d = std::uniform_int_distribution<int>(1, std::min(6, n - 1))(gen);
    const int k = std::uniform_int_distribution<int>(0, d)(gen);
    std::vector<SampleId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), gen);
    const std::set<SampleId> infected(ids.begin(), ids.begin() + k);
    for (const auto& cfg : {gbs(n, d), mst(n, d)}) {
      const auto r = run_ideal(cfg, infected);
      EXPECT_TRUE(diagnosed_exactly(r.final_state, infected)) << to_string(cfg.algorithm) << n << " " << d;
      EXPECT_EQ(r.final_state.underestimates(), 0);
    }
  }
}

TEST(Planners, CustomSampleIds) {
  const auto s = planner_init(gbs(4, 1), {40, 41, 42, 43});
  EXPECT_EQ(s.pending()[0].members, (std::vector<SampleId>{40, 41, 42, 43}));
  EXPECT_THROW(planner_init(gbs(4, 1), {1, 1, 2, 3}), ConfigurationError);
  EXPECT_THROW(planner_init(gbs(4, 1), {1, 2}), ConfigurationError);
}

TEST(Planners, ProtocolErrors) {
  const auto s = planner_init(mst(16, 1));
  EXPECT_THROW(planner_observe(s, std::vector<GroupOutcome>{{0, true}}), ProtocolError);
  EXPECT_THROW(planner_observe(s, std::vector<GroupOutcome>{{0, true}, {0, false}, {1, false}}),
               ProtocolError);
  EXPECT_THROW(planner_observe(s, std::vector<GroupOutcome>{{0, true}, {1, false}, {9, false}}),
               ProtocolError);
  auto done = run_ideal(gbs(4, 1), {}).final_state;
  EXPECT_THROW(planner_next(done), UsageError);
}

TEST(Planners, ConfigErrors) {
  EXPECT_THROW(gbs(8, 8).validate(), ConfigurationError);
  EXPECT_THROW(mst(8, 0).validate(), ConfigurationError);
  EXPECT_THROW(nt(8, 1.5).validate(), ConfigurationError);
  EXPECT_THROW(nt(8, 0.0).validate(), ConfigurationError);
  EXPECT_THROW(planner_init(nt(300, 0.1)), ConfigurationError);
  EXPECT_THROW(parse_algorithm("fancy"), ConfigurationError);
}

TEST(Planners, JsonRoundTripMidRun) {
  for (const auto& cfg : {gbs(16, 2), mst(16, 2), nt(16, 0.1)}) {
    auto s = planner_init(cfg);
    std::vector<GroupOutcome> first;
    for (const auto& q : s.pending()) first.push_back({q.id, true});
    s = planner_observe(std::move(s), first);
    const nlohmann::json j = s;
    const auto back = j.get<PlannerState>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(back.check_invariants(), "");
    nlohmann::json bad = j;
    bad["version"] = 99;
    EXPECT_THROW(bad.get<PlannerState>(), LoadError);
  }
}

TEST(Bounds, GbsBoundAndMstWorstCase) {
  EXPECT_NEAR(gbs_worst_case_bound(8, 1), 4.0, 1e-9);
  EXPECT_NEAR(mst_worst_case_bound(16, 1), std::exp(1.0) * std::log(16.0), 1e-12);
  EXPECT_EQ(mst_worst_case_tests(16, 1), 8);
  for (int n = 8; n <= 48; ++n)
    for (int d = 1; d <= 6; ++d) EXPECT_LE(mst_worst_case_tests(n, d), n) << n << " " << d;
}

TEST(Bounds, PerSampleRequirement) {
  EXPECT_EQ(per_sample_query_requirement(gbs(16, 1)), 5);
  EXPECT_EQ(per_sample_query_requirement(mst(16, 1)), 3);
  EXPECT_EQ(per_sample_query_requirement(nt(16, 0.1)), 5);
  EXPECT_EQ(per_sample_query_requirement(make(Algorithm::kIndividual, 16)), 1);
}

TEST(Bounds, GbsRoundStaysWithinLogBound) {
  for (int n = 2; n <= 16; ++n) {
    for (int d = 1; d < n && d <= 3; ++d) {
      const int bound = static_cast<int>(std::floor(std::log2(static_cast<double>(n) / d))) + 1;
      for (SampleId a = 0; a < n; ++a) {
        const auto r = run_ideal(gbs(n, d), {a});
        EXPECT_LE(r.final_state.max_round_queries_per_sample(), bound) << n << " " << d;
      }
    }
  }
}

}  // namespace
}  // namespace pooltest
