#include "pooltest/dilution.hpp"

#include <cmath>
#include <numbers>

#include "pooltest/errors.hpp"
#include "pooltest/normal.hpp"

namespace pooltest {

double efficiency_threshold() { return (3.0 - std::sqrt(5.0)) / 2.0; }

bool gt_beneficial(std::int64_t d, std::int64_t n) {
  if (n < 1 || d < 0 || d > n) throw DomainError("gt_beneficial: need 1 <= n and 0 <= d <= n");
  return static_cast<double>(d) / static_cast<double>(n) < efficiency_threshold();
}

double pooled_sensitivity_total(const TestKitProfile& profile, std::int64_t n, double total_load) {
  if (n < 1) throw DomainError("pooled_sensitivity: pool size must be >= 1");
  if (!(total_load > 0.0)) throw DomainError("pooled_sensitivity: infected load must be positive");
  const double z = probit95() *
                   std::log10(profile.chi * total_load / (static_cast<double>(n) * profile.v50)) /
                   std::log10(profile.v95 / profile.v50);
  return normal_cdf(z);
}

double pooled_sensitivity(const DilutionQuery& q) {
  if (q.d < 1 || q.d > q.n) throw DomainError("pooled_sensitivity: need 1 <= d <= n");
  if (!(q.vp > 0.0)) throw DomainError("pooled_sensitivity: vp must be positive");
  return pooled_sensitivity_total(q.profile, q.n, static_cast<double>(q.d) * q.vp);
}

namespace {

// Per-test load reaching sensitivity 1 - gamma_star; exactly v95 at gamma_star = 0.05.
double per_test_load(const TestKitProfile& profile, double gamma_star) {
  if (gamma_star == 0.05) return profile.v95 / profile.chi;
  const double exponent =
      normal_quantile(1.0 - gamma_star) / probit95() * std::log10(profile.v95 / profile.v50);
  return profile.v50 * std::pow(10.0, exponent) / profile.chi;
}

void check_gamma_star(double gamma_star) {
  if (!(gamma_star > 0.0 && gamma_star < 0.5))
    throw DomainError("gamma_star must lie in (0, 0.5)");
}

std::int64_t floor_count(double raw) {
  // Absorb the last-ulp error of pow/log so exact integer ratios are not floored down.
  const double f = std::floor(raw * (1.0 + 1e-12));
  return f < 1.0 ? 1 : static_cast<std::int64_t>(f);
}

}  // namespace

PoolSizeResult max_pool_size_general(const PoolSizeQuery& q, const TestKitProfile& profile) {
  if (!q.tests) throw DomainError("max_pool_size_general: tests per sample must be given");
  if (!(q.vl > 0.0)) throw DomainError("max_pool_size_general: viral load must be positive");
  if (q.r < 1 || *q.tests < 1) throw DomainError("max_pool_size_general: r and tests must be >= 1");
  check_gamma_star(q.gamma_star);
  if (q.gamma_star != 0.05) profile.validate();
  const double raw = q.vl / (q.r * static_cast<double>(*q.tests) *
                             per_test_load(profile, q.gamma_star));
  return {floor_count(raw), raw};
}

double lambert_w0(double x) {
  if (!(x >= 0.0)) throw DomainError("lambert_w0: x must be nonnegative");
  if (x == 0.0) return 0.0;
  double w = std::log1p(x);
  for (int i = 0; i < 50; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double step = f / (ew * (w + 1) - (w + 2) * f / (2 * w + 2));
    w -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
  }
  return w;
}

PoolSizeResult max_pool_size_logrule(double vl, int r, double required_load) {
  if (!(vl > 0.0) || !(required_load > 0.0))
    throw DomainError("max_pool_size_logrule: loads must be positive");
  if (r < 1) throw DomainError("max_pool_size_logrule: r must be >= 1");
  const double arg = vl / (r * required_load * std::numbers::log2e);
  const double raw = std::exp(lambert_w0(arg));
  return {floor_count(raw), raw};
}

PortionResult max_portions(double vl, double required_load) {
  if (!(vl > 0.0) || !(required_load > 0.0))
    throw DomainError("max_portions: loads must be positive");
  const double raw = vl / required_load;
  if (required_load > vl) return {0, raw, false};
  return {floor_count(raw), raw, true};
}

double required_load(const TestKitProfile& profile, double gamma_star, int r) {
  check_gamma_star(gamma_star);
  if (r < 1) throw DomainError("required_load: r must be >= 1");
  if (r == 1) return per_test_load(profile, gamma_star);
  // Per-replicate false-negative rate g with gamma_r(g, r) = gamma_star; gamma_r is
  // increasing in g on [0, 0.5].
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_r(mid, r) < gamma_star) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return per_test_load(profile, 0.5 * (lo + hi));
}

DilutionReport dilution_report(const TestKitProfile& profile, double viral_load,
                               double gamma_star, int replicates, std::optional<int> tests) {
  if (!(profile.v95 > 0.0)) throw DomainError("dilution: v95 must be positive");
  if (profile.v50 != 0.0 && !(profile.v50 < profile.v95))
    throw DomainError("dilution: v50 must be smaller than v95");
  if (gamma_star != 0.05 && !(profile.v50 > 0.0))
    throw DomainError("dilution: v50 is required when gamma_star != 0.05");
  check_gamma_star(gamma_star);

  DilutionReport rep;
  rep.viral_load = viral_load;
  rep.gamma_star = gamma_star;
  rep.replicates = replicates;
  rep.tests = tests;
  rep.required_load = per_test_load(profile, gamma_star);
  rep.logrule_pool = max_pool_size_logrule(viral_load, replicates, rep.required_load);
  if (tests) {
    rep.pool = max_pool_size_general({viral_load, replicates, tests, gamma_star}, profile);
  } else {
    rep.pool = *rep.logrule_pool;
  }
  rep.portions = max_portions(viral_load, rep.required_load);
  return rep;
}

nlohmann::json to_json(const DilutionReport& report) {
  nlohmann::json assumptions = {
      {"viral_load", report.viral_load},
      {"gamma_star", report.gamma_star},
      {"replicates", report.replicates},
      {"required_load", report.required_load},
      {"infected_in_pool", 1},
      {"tests_per_sample", report.tests ? nlohmann::json(*report.tests) : nlohmann::json("log-rule")},
  };
  nlohmann::json j = {
      {"pool_size", report.pool.pool_size},
      {"raw", report.pool.raw},
      {"portions", report.portions.portions},
      {"usable", report.portions.usable && report.pool.raw >= 2.0},
      {"assumptions", assumptions},
  };
  if (report.tests && report.logrule_pool) {
    j["logrule_pool_size"] = report.logrule_pool->pool_size;
    j["logrule_raw"] = report.logrule_pool->raw;
  }
  return j;
}

}  // namespace pooltest
