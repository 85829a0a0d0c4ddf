#pragma once

// Assay error model and the per-sample statistics built on it: sensitivity as a
// function of viral load, replicated false-negative/false-positive rates, majority
// decisions, the a-posteriori probability ratio and prior estimation.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace pooltest {

// Error model of one assay (PCR kit). Sensitivity follows a probit law in
// log10(load): 0.5 at v50 particles and 0.95 at v95 particles.
struct TestKitProfile {
  double v50 = 0.0;
  double v95 = 0.0;
  double beta = 0.0;  // false-positive rate of a single physical test
  double chi = 1.0;   // RNA copies per viral particle

  // Throws DomainError unless 0 < v50 < v95, 0 <= beta < 0.5 and chi >= 1.
  void validate() const;
};

enum class ReplicationMode { kNone, kNegativesOnly, kAll };

std::string_view to_string(ReplicationMode mode);
ReplicationMode parse_replication_mode(std::string_view text);

struct ReplicationPolicy {
  int r = 2;
  ReplicationMode mode = ReplicationMode::kNegativesOnly;

  // r >= 1, and mode none requires r == 1.
  void validate() const;
  // Physical reads a single logical query may consume in the worst case.
  int max_reads() const { return mode == ReplicationMode::kNone ? 1 : r; }
};

struct PriorEstimate {
  std::int64_t positives = 0;
  std::int64_t tests = 0;
  double alpha = 0.0;
};

// Probability that a single physical test on `load` particles is positive.
// Throws DomainError for load <= 0.
double sensitivity_at_load(const TestKitProfile& profile, double load);

// gamma(l) = 1 - sensitivity_at_load(l).
double false_negative_at_load(const TestKitProfile& profile, double load);

// Smallest load whose sensitivity reaches `sensitivity` (bisection on log-load).
double load_for_sensitivity(const TestKitProfile& profile, double sensitivity);

// v95 such that a profile with the given v50 has `sensitivity` at `load`.
// Requires load > v50 and 0.5 < sensitivity < 1; solved by bisection.
double calibrate_v95(double v50, double load, double sensitivity);

// Probability that the majority decision over r replicates is negative for an
// infected sample whose single-test false-negative rate is gamma.
double gamma_r(double gamma, int r);

// Probability that the majority decision over r replicates is positive for an
// uninfected sample. Ties (r even, r/2 positives) count as positive.
double beta_r(double beta, int r);

// A-posteriori ratio Pr(uninfected | reads) / Pr(infected | reads) for r reads of which
// m are negative. Degenerate denominators/numerators map to the sentinels below
// instead of dividing by zero.
struct AprResult {
  enum class Kind { kFinite, kCertainInfected, kCertainUninfected };
  Kind kind = Kind::kFinite;
  double value = 0.0;  // 0 for certain-infected, +inf for certain-uninfected

  bool declares_negative() const { return value > 1.0; }
};
AprResult apr(double alpha, double gamma, double beta, int r, int m);

// Majority rule over replicate reads: positive iff #positive >= ceil(r/2).
// Throws UsageError on an empty list.
bool majority_decide(std::span<const bool> reads);

// alpha = positives / tests. Throws DomainError when tests == 0 or positives > tests.
PriorEstimate estimate_prior(std::int64_t positives, std::int64_t tests);

void to_json(nlohmann::json& j, const TestKitProfile& p);
void from_json(const nlohmann::json& j, TestKitProfile& p);
void to_json(nlohmann::json& j, const ReplicationPolicy& p);
void from_json(const nlohmann::json& j, ReplicationPolicy& p);

}  // namespace pooltest
