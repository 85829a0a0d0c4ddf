#pragma once

// Pooling dilution: sensitivity of a pooled test, the largest pool a swab supports,
// and how many portions a swab can be split into.

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "pooltest/test_model.hpp"

namespace pooltest {

// (3 - sqrt 5) / 2: pooling reduces the test count only while d/n stays below it.
double efficiency_threshold();

// True iff d/n < efficiency_threshold().
bool gt_beneficial(std::int64_t d, std::int64_t n);

struct DilutionQuery {
  TestKitProfile profile;
  std::int64_t n = 1;  // pool size
  std::int64_t d = 1;  // infected members
  double vp = 0.0;     // particles contributed by each infected member
};

// Sensitivity of a pool of n portions of which d carry vp particles each.
double pooled_sensitivity(const DilutionQuery& q);

// Same model with the infected contribution given as a total particle count
// (sum of the infected members' portion loads).
double pooled_sensitivity_total(const TestKitProfile& profile, std::int64_t n, double total_load);

struct PoolSizeResult {
  std::int64_t pool_size = 1;  // floored, clamped to >= 1
  double raw = 0.0;            // unfloored real value
};

struct PoolSizeQuery {
  double vl = 0.0;            // particles in one swab
  int r = 1;                  // replicates per test
  std::optional<int> tests;   // tests per sample; empty = log2(N) rule
  double gamma_star = 0.05;   // target false-negative rate of a pooled test
};

// Largest pool such that one infected portion in the pool still reaches
// sensitivity 1 - gamma_star, with the swab split into r * tests portions.
// Requires q.tests.
PoolSizeResult max_pool_size_general(const PoolSizeQuery& q, const TestKitProfile& profile);

// Largest N with N * log2(N) <= vl / (r * required_load), via the principal Lambert W
// branch. With required_load = v95 this is the 95%-sensitivity pool size.
PoolSizeResult max_pool_size_logrule(double vl, int r, double required_load);

// Principal branch W0 on x >= 0: w * exp(w) = x to 1e-10 relative.
double lambert_w0(double x);

struct PortionResult {
  std::int64_t portions = 0;
  double raw = 0.0;
  bool usable = true;  // false when one portion cannot even reach the required load
};

// floor(vl / required_load).
PortionResult max_portions(double vl, double required_load);

// Load needed per test so that a sample replicated r times (majority decision) has
// false-negative rate gamma_star: gamma^{-1}(g) where gamma_r(g, r) = gamma_star.
double required_load(const TestKitProfile& profile, double gamma_star, int r = 1);

struct DilutionReport {
  PoolSizeResult pool;
  std::optional<PoolSizeResult> logrule_pool;
  PortionResult portions;
  double required_load = 0.0;
  double viral_load = 0.0;
  double gamma_star = 0.05;
  int replicates = 1;
  std::optional<int> tests;
};

// Everything the dilution calculator shows: pool size for the requested rule (and the
// log-rule one), the per-swab portion budget and the assumptions used.
DilutionReport dilution_report(const TestKitProfile& profile, double viral_load,
                               double gamma_star, int replicates, std::optional<int> tests);

// {"pool_size", "raw", "portions", "assumptions": {...}}
nlohmann::json to_json(const DilutionReport& report);

}  // namespace pooltest
