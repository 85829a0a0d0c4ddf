#pragma once

// Monte Carlo and exhaustive evaluation of planners.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pooltest/planners.hpp"
#include "pooltest/test_model.hpp"

namespace pooltest {

struct TruthModel {
  enum class Kind { kFixedD, kBernoulli };
  Kind kind = Kind::kFixedD;
  int d = 0;
  double alpha = 0.0;
  // Particles in an infected sample; drawn log-uniformly when vp_min < vp_max.
  double vp_min = 1e4;
  double vp_max = 1e4;

  static TruthModel fixed(int d);
  static TruthModel bernoulli(double alpha);
  void validate(int n) const;
};

struct OutcomeOracle {
  enum class Kind { kIdeal, kNoisy, kFixedRate };
  Kind kind = Kind::kIdeal;
  // kNoisy: a group holding infected members answers positive with the pooled
  // sensitivity of its members' per-portion loads; a clean group with profile.beta.
  TestKitProfile profile;
  // Portions each sample is split into; default is the planner's per-sample query
  // requirement times the replication factor.
  std::optional<int> portions;
  // kFixedRate: infected groups miss with probability gamma, clean groups fire with beta.
  double gamma = 0.0;
  double beta = 0.0;

  static OutcomeOracle ideal();
  static OutcomeOracle noisy(const TestKitProfile& profile, std::optional<int> portions = {});
  static OutcomeOracle fixed_rate(double gamma, double beta);
  void validate() const;
};

struct SimulationRequest {
  PlannerConfig planner;
  TruthModel truth;
  OutcomeOracle oracle;
  ReplicationPolicy replication{1, ReplicationMode::kNone};
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency; never changes the report
};

struct CountStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::int64_t max = 0;
  std::map<std::int64_t, std::int64_t> histogram;  // count -> trials
};

struct SimulationReport {
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  CountStats tests;          // physical reads per trial
  CountStats logical_tests;  // planner queries per trial
  double sensitivity = 1.0;  // infected flagged positive / infected
  double fpr = 0.0;          // uninfected flagged positive / uninfected
  std::int64_t infected = 0;
  std::int64_t uninfected = 0;
  double mean_portions_per_sample = 0.0;
  std::int64_t planner_failures = 0;  // trials where the planner saw more infected than d
  std::int64_t misdiagnosed_trials = 0;
  std::string worst_case_label = "observed max (Monte Carlo)";
};

// Runs request.trials independent trials. Trial t draws from Philox streams keyed by
// the seed with counter (t, stream, index); the report is a reduction in trial order.
SimulationReport simulate(const SimulationRequest& request);

inline constexpr int kExhaustiveCap = 20;

struct ExhaustiveReport {
  PlannerConfig planner;
  std::int64_t patterns = 0;
  // Mean over the patterns with exactly d infected (GBS, MST, individual) or the
  // prior-weighted mean over all patterns (NT).
  double expected_tests = 0.0;
  double expected_tests_at_most_d = 0.0;  // uniform over every enumerated pattern
  std::int64_t worst_case = 0;
  std::vector<SampleId> certificate;  // infected samples of a pattern reaching worst_case
  bool all_correct = true;
  double detection_probability = 1.0;
  int max_queries_per_sample = 0;
  int max_round_queries_per_sample = 0;
  std::int64_t planner_failures = 0;
  std::string worst_case_label = "exact (exhaustive)";
};

// Ideal-oracle sweep over every infection pattern: at most d infected for GBS, MST and
// individual testing, all 2^n patterns weighted by the prior for NT. Worst case and
// correctness cover every pattern.
ExhaustiveReport exhaustive_sweep(const PlannerConfig& planner);

// Ideal-oracle run of one pattern; returns the queries in issue order.
struct Trace {
  std::vector<GroupQuery> queries;
  std::vector<SampleId> positives;
  std::int64_t tests = 0;
};
Trace ideal_trace(const PlannerConfig& planner, const std::vector<bool>& infected);

nlohmann::json to_json(const SimulationReport& report);
nlohmann::json to_json(const ExhaustiveReport& report);
nlohmann::json to_json(const TruthModel& truth);
nlohmann::json to_json(const OutcomeOracle& oracle);

// Histogram as CSV: tests,trials,fraction.
std::string histogram_csv(const SimulationReport& report);

// "%.9g" formatting shared by every CSV writer.
std::string format_number(double value);

}  // namespace pooltest
