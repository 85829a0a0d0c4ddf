#include "pooltest/test_model.hpp"

#include <cmath>
#include <limits>

#include "pooltest/errors.hpp"
#include "pooltest/normal.hpp"

namespace pooltest {

void TestKitProfile::validate() const {
  if (!(v50 > 0.0)) throw DomainError("profile: v50 must be positive");
  if (!(v95 > v50)) throw DomainError("profile: v50 must be smaller than v95");
  if (!(beta >= 0.0 && beta < 0.5)) throw DomainError("profile: beta must lie in [0, 0.5)");
  if (!(chi >= 1.0)) throw DomainError("profile: chi must be >= 1");
}

std::string_view to_string(ReplicationMode mode) {
  switch (mode) {
    case ReplicationMode::kNone: return "none";
    case ReplicationMode::kNegativesOnly: return "negatives-only";
    case ReplicationMode::kAll: return "all";
  }
  return "none";
}

ReplicationMode parse_replication_mode(std::string_view text) {
  if (text == "none") return ReplicationMode::kNone;
  if (text == "negatives-only") return ReplicationMode::kNegativesOnly;
  if (text == "all") return ReplicationMode::kAll;
  throw ConfigurationError("unknown replication mode '" + std::string(text) +
                           "' (expected none, negatives-only or all)");
}

void ReplicationPolicy::validate() const {
  if (r < 1) throw ConfigurationError("replication: r must be >= 1");
  if (mode == ReplicationMode::kNone && r != 1)
    throw ConfigurationError("replication: mode none requires r = 1");
}

double sensitivity_at_load(const TestKitProfile& profile, double load) {
  if (!(load > 0.0)) throw DomainError("sensitivity_at_load: load must be positive");
  const double z = probit95() * std::log10(profile.chi * load / profile.v50) /
                   std::log10(profile.v95 / profile.v50);
  return normal_cdf(z);
}

double false_negative_at_load(const TestKitProfile& profile, double load) {
  return 1.0 - sensitivity_at_load(profile, load);
}

double load_for_sensitivity(const TestKitProfile& profile, double sensitivity) {
  if (!(sensitivity > 0.0 && sensitivity < 1.0))
    throw DomainError("load_for_sensitivity: sensitivity must lie in (0, 1)");
  // Bracket in log10 space; sensitivity is monotone in load.
  double lo = std::log10(profile.v50) - 1.0;
  double hi = std::log10(profile.v95) + 1.0;
  while (sensitivity_at_load(profile, std::pow(10.0, lo)) > sensitivity) lo -= 1.0;
  while (sensitivity_at_load(profile, std::pow(10.0, hi)) < sensitivity) hi += 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (sensitivity_at_load(profile, std::pow(10.0, mid)) < sensitivity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::pow(10.0, hi);
}

double calibrate_v95(double v50, double load, double sensitivity) {
  if (!(v50 > 0.0 && load > v50))
    throw DomainError("calibrate_v95: need 0 < v50 < load");
  if (!(sensitivity > 0.5 && sensitivity < 1.0))
    throw DomainError("calibrate_v95: sensitivity must lie in (0.5, 1)");
  // Sensitivity at `load` decreases as v95 grows.
  const auto at = [&](double log_v95) {
    return sensitivity_at_load({v50, std::pow(10.0, log_v95), 0.0, 1.0}, load);
  };
  double lo = std::log10(v50) + 1e-12;
  double hi = std::log10(v50) + 1.0;
  while (at(hi) > sensitivity) hi += 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid) > sensitivity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

// Sum over t = first..r of C(r,t) p^t (1-p)^(r-t).
double binomial_upper_tail(double p, int r, int first) {
  double sum = 0.0;
  double coeff = 1.0;  // C(r, t), built incrementally from C(r, 0)
  for (int t = 0; t <= r; ++t) {
    if (t > 0) coeff = coeff * (r - t + 1) / t;
    if (t >= first) sum += coeff * std::pow(p, t) * std::pow(1.0 - p, r - t);
  }
  return sum;
}

}  // namespace

double gamma_r(double gamma, int r) {
  check_probability(gamma, "gamma");
  if (r < 1) throw DomainError("gamma_r: r must be >= 1");
  return binomial_upper_tail(gamma, r, r / 2 + 1);
}

double beta_r(double beta, int r) {
  check_probability(beta, "beta");
  if (r < 1) throw DomainError("beta_r: r must be >= 1");
  return binomial_upper_tail(beta, r, (r + 1) / 2);
}

AprResult apr(double alpha, double gamma, double beta, int r, int m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("apr: alpha must lie in (0, 1)");
  check_probability(gamma, "gamma");
  check_probability(beta, "beta");
  if (r < 1 || m < 0 || m > r) throw DomainError("apr: need r >= 1 and 0 <= m <= r");

  const double uninfected = (1 - alpha) * std::pow(beta, r - m) * std::pow(1 - beta, m);
  const double infected = alpha * std::pow(gamma, m) * std::pow(1 - gamma, r - m);
  if (infected == 0.0 && uninfected > 0.0)
    return {AprResult::Kind::kCertainUninfected, std::numeric_limits<double>::infinity()};
  if (infected == 0.0 || uninfected == 0.0) return {AprResult::Kind::kCertainInfected, 0.0};
  return {AprResult::Kind::kFinite, uninfected / infected};
}

bool majority_decide(std::span<const bool> reads) {
  if (reads.empty()) throw UsageError("majority_decide: no replicate reads");
  std::size_t positives = 0;
  for (bool b : reads) positives += b ? 1 : 0;
  return positives >= (reads.size() + 1) / 2;
}

PriorEstimate estimate_prior(std::int64_t positives, std::int64_t tests) {
  if (tests <= 0) throw DomainError("estimate_prior: need at least one test");
  if (positives < 0 || positives > tests)
    throw DomainError("estimate_prior: positives must lie in [0, tests]");
  return {positives, tests, static_cast<double>(positives) / static_cast<double>(tests)};
}

void to_json(nlohmann::json& j, const TestKitProfile& p) {
  j = {{"v50", p.v50}, {"v95", p.v95}, {"beta", p.beta}, {"chi", p.chi}};
}

void from_json(const nlohmann::json& j, TestKitProfile& p) {
  p.v50 = j.at("v50").get<double>();
  p.v95 = j.at("v95").get<double>();
  p.beta = j.value("beta", 0.0);
  p.chi = j.value("chi", 1.0);
}

void to_json(nlohmann::json& j, const ReplicationPolicy& p) {
  j = {{"r", p.r}, {"mode", std::string(to_string(p.mode))}};
}

void from_json(const nlohmann::json& j, ReplicationPolicy& p) {
  p.r = j.value("r", 2);
  p.mode = parse_replication_mode(j.value("mode", std::string("negatives-only")));
}

}  // namespace pooltest
