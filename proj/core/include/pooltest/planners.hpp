#pragma once

// Adaptive group-testing planners behind one contract:
//
//   PlannerState s = planner_init(config);
//   while (!s.terminal()) {
//     auto queries = planner_next(s);          // pooled tests to run now
//     s = planner_observe(std::move(s), outcomes_for(queries));
//   }
//
// A pooled test is positive iff at least one member is infected. GBS and NT issue one
// query at a time; MST issues a whole stage, individual testing issues every sample.
// Group membership is deterministic: samples are taken in their initial order.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pooltest/nt_table.hpp"

namespace pooltest {

using SampleId = std::int64_t;
using QueryId = std::int64_t;

enum class Algorithm { kGbs, kMst, kNt, kIndividual };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct PlannerConfig {
  Algorithm algorithm = Algorithm::kGbs;
  int n = 0;
  int d = 0;                  // upper bound on infected (GBS, MST)
  double alpha = 0.0;         // prior (NT)
  std::optional<int> stages;  // MST stage override
  bool verify = false;        // GBS: pool the presumed negatives into one final test
  int nt_table_cap = kDefaultNtTableCap;

  // Throws ConfigurationError on inconsistent parameters.
  void validate() const;
};

void to_json(nlohmann::json& j, const PlannerConfig& c);
void from_json(const nlohmann::json& j, PlannerConfig& c);

struct GroupQuery {
  QueryId id = 0;
  std::vector<SampleId> members;
  int replicate_index = 1;

  bool operator==(const GroupQuery&) const = default;
};

void to_json(nlohmann::json& j, const GroupQuery& q);
void from_json(const nlohmann::json& j, GroupQuery& q);

struct GroupOutcome {
  QueryId id = 0;
  bool positive = false;
};

enum class Diagnosis : std::uint8_t { kUndiagnosed, kPositive, kNegative };

namespace detail {

// Samples are tracked by their position 0..n-1 in the initial pool.
struct GbsState {
  enum class Phase { kGroup, kBsp, kIndividual, kVerify, kDone };
  Phase phase = Phase::kGroup;
  int d = 0;                 // infected still to find
  std::vector<int> pool;     // undetermined, not in the active BSP range
  std::vector<int> active;   // BSP range known to hold an infected sample
  std::vector<int> tested;   // members of the outstanding query
  std::vector<int> round_counts;  // queries per sample in the current round
};

struct MstState {
  int d = 0;
  int s = 0;
  int stage = 0;  // 1-based
  double delta = 0.0;
  std::vector<int> qsb;
  std::vector<std::vector<int>> groups;  // outstanding stage groups
};

struct NtState {
  double alpha = 0.0;
  std::shared_ptr<const NtCostTable> table;
  std::vector<int> ub;   // undiagnosed, no information
  std::vector<int> pib;  // contains at least one infected
  std::vector<int> tested;
};

struct IndividualState {};

}  // namespace detail

class PlannerState {
 public:
  const PlannerConfig& config() const { return config_; }
  Algorithm algorithm() const { return config_.algorithm; }
  bool terminal() const { return pending_.empty(); }

  std::span<const SampleId> samples() const { return samples_; }
  std::span<const GroupQuery> pending() const { return pending_; }
  Diagnosis diagnosis(std::size_t index) const { return status_[index]; }

  std::vector<SampleId> undiagnosed() const;
  std::vector<SampleId> diagnosed_positive() const;
  std::vector<SampleId> diagnosed_negative() const;

  // Logical queries issued so far (including pending ones).
  std::int64_t queries_issued() const { return next_query_id_; }
  // Times the configured d proved too small (GBS verification positive, MST re-plan).
  int underestimates() const { return underestimates_; }
  // Largest number of queries any single sample has been part of.
  int max_queries_per_sample() const;
  std::span<const int> queries_per_sample() const { return per_sample_; }
  // GBS only: largest per-sample query count within one group-test + BSP round.
  int max_round_queries_per_sample() const { return max_round_; }
  // MST only: current number of stages and stage index.
  int mst_stages() const;
  int mst_stage() const;

  // Checks bin disjointness/cover and that pending queries only name undiagnosed
  // samples. Returns an empty string when consistent.
  std::string check_invariants() const;

  friend PlannerState planner_init(const PlannerConfig& config, std::vector<SampleId> sample_ids);
  friend PlannerState planner_observe(PlannerState state, std::span<const GroupOutcome> outcomes);
  friend void to_json(nlohmann::json& j, const PlannerState& s);
  friend void from_json(const nlohmann::json& j, PlannerState& s);

 private:
  friend struct PlannerOps;

  PlannerConfig config_;
  std::vector<SampleId> samples_;
  std::vector<Diagnosis> status_;
  std::vector<int> per_sample_;
  std::vector<GroupQuery> pending_;
  QueryId next_query_id_ = 0;
  int underestimates_ = 0;
  int max_round_ = 0;
  std::variant<detail::GbsState, detail::MstState, detail::NtState, detail::IndividualState> alg_;
};

// Sample ids default to 0..n-1; when given they must be n distinct values.
PlannerState planner_init(const PlannerConfig& config, std::vector<SampleId> sample_ids = {});

// Queries that can be answered now. Throws UsageError on a terminal state.
std::vector<GroupQuery> planner_next(const PlannerState& state);

// Outcomes must answer exactly the pending queries; otherwise ProtocolError and the
// input state is left unchanged.
PlannerState planner_observe(PlannerState state, std::span<const GroupOutcome> outcomes);

// Versioned document {"version", "algorithm", "bins", "pending", "alg_state"}.
void to_json(nlohmann::json& j, const PlannerState& s);
void from_json(const nlohmann::json& j, PlannerState& s);
inline constexpr int kPlannerStateVersion = 1;

// Optimal MST stage count: argmin of x*d*(n/d)^(1/x) over x in {floor(ln n/d),
// ceil(ln n/d)}, x >= 1, smaller x on ties.
int mst_optimal_stages(int n, int d);

// log2 C(n, d) + d.
double gbs_worst_case_bound(int n, int d);

// e * d * ln(n / d).
double mst_worst_case_bound(int n, int d);

// k1 (1 - d/n) / (1 - (d/n)^(1/s)) with k1 = (n/d)^(1 - 1/s); 0 when d == n.
double mst_inherent_replication_savings(int n, int d, int s);

// Exact MST worst-case test count over all patterns with at most d infected
// (stage-wise search over which groups test positive).
int mst_worst_case_tests(int n, int d, std::optional<int> stages = std::nullopt);

// Portions a sample needs for one read of every query it can join: GBS
// floor(log2(n/d)) + 1, MST s, NT ceil(log2 n) + 1, individual 1.
int per_sample_query_requirement(const PlannerConfig& config);

// MST stage sizes for `count` queued samples: first count mod g groups get one extra.
std::vector<int> mst_group_sizes(int count, int groups);
int mst_group_count(int queued, int stage, int stages, double delta);

}  // namespace pooltest
