#pragma once

// Expected-cost tables for nested testing.
//
// G(m, n) is the minimum expected number of further tests when n samples are still
// undiagnosed and m of them (m >= 1) form a group known to contain at least one
// infected sample; G(0, n) is the same with no such group. Every sample is infected
// independently with probability alpha.
//
//   G(0,0) = 0, G(0,1) = 1, G(1,n) = G(0,n-1)
//   G(0,n) = min_{x=1..n}   1 + q^x G(0,n-x) + (1-q^x) G(x,n)
//   G(m,n) = min_{x=1..m-1} 1 + (q^x-q^m)/(1-q^m) G(m-x,n-x) + (1-q^x)/(1-q^m) G(x,n)
//
// with q = 1 - alpha. choice(m, n) is the minimizing x (smallest on ties).

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

namespace pooltest {

inline constexpr int kDefaultNtTableCap = 256;

class NtCostTable {
 public:
  NtCostTable() = default;

  double alpha() const { return alpha_; }
  int n_max() const { return n_max_; }

  // Requires 0 <= m <= n <= n_max.
  double cost(int m, int n) const;
  // Requires n >= 1 and (m == 0 or 2 <= m <= n).
  int choice(int m, int n) const;

  friend NtCostTable nt_build_table(double alpha, int n_max, int cap);
  friend void to_json(nlohmann::json& j, const NtCostTable& t);
  friend void from_json(const nlohmann::json& j, NtCostTable& t);

 private:
  std::size_t index(int m, int n) const {
    return static_cast<std::size_t>(n) * (n + 1) / 2 + static_cast<std::size_t>(m);
  }

  double alpha_ = 0.0;
  int n_max_ = 0;
  std::vector<double> g_;       // triangular, row n holds m = 0..n
  std::vector<std::int32_t> x_;  // argmin, 0 where undefined
};

// O(n_max^3). Throws ConfigurationError for alpha outside (0,1), n_max < 1, or
// n_max > cap (pass a larger cap to opt in).
NtCostTable nt_build_table(double alpha, int n_max, int cap = kDefaultNtTableCap);

// Process-wide cache of immutable tables keyed by (alpha, n_max).
std::shared_ptr<const NtCostTable> shared_nt_table(double alpha, int n_max,
                                                   int cap = kDefaultNtTableCap);

// Expected tests of nested testing on n samples: G(0, n). alpha = 0 gives 1 (a single
// negative pool) and alpha = 1 gives n.
double nt_average_tests(double alpha, int n, int cap = kDefaultNtTableCap);

// {"alpha", "n_max", "g": [[G(0,n)..G(n,n)] for n = 0..n_max], "choice": [...]}
void to_json(nlohmann::json& j, const NtCostTable& t);
void from_json(const nlohmann::json& j, NtCostTable& t);

}  // namespace pooltest
