#include <cmath>
#include <map>
#include <utility>

#include <gtest/gtest.h>

#include "pooltest/errors.hpp"
#include "pooltest/nt_table.hpp"

namespace pooltest {
namespace {

// Straight memoized transcription of the recursion with plain pow().
class NaiveG {
 public:
  explicit NaiveG(double alpha) : q_(1.0 - alpha) {}

  double operator()(int m, int n) {
    if (n == 0) return 0.0;
    if (m == 0 && n == 1) return 1.0;
    if (m == 1) return (*this)(0, n - 1);
    const auto key = std::make_pair(m, n);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double best = INFINITY;
    if (m == 0) {
      for (int x = 1; x <= n; ++x) {
        const double qx = std::pow(q_, x);
        best = std::min(best, 1.0 + qx * (*this)(0, n - x) + (1.0 - qx) * (*this)(x, n));
      }
    } else {
      const double qm = std::pow(q_, m);
      for (int x = 1; x <= m - 1; ++x) {
        const double qx = std::pow(q_, x);
        best = std::min(best, 1.0 + (qx - qm) / (1.0 - qm) * (*this)(m - x, n - x) +
                                  (1.0 - qx) / (1.0 - qm) * (*this)(x, n));
      }
    }
    memo_[key] = best;
    return best;
  }

 private:
  double q_;
  std::map<std::pair<int, int>, double> memo_;
};

TEST(NtTable, HandValues) {
  const auto t = nt_build_table(0.1, 4);
  EXPECT_NEAR(t.cost(2, 2), 1.0 + 1.0 / (2.0 - 0.1), 1e-12);
  EXPECT_NEAR(t.cost(2, 2), 1.5263, 1e-4);
  EXPECT_NEAR(t.cost(0, 2), 1.29, 1e-12);
  EXPECT_EQ(t.cost(0, 0), 0.0);
  EXPECT_EQ(t.cost(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(t.cost(1, 3), t.cost(0, 2));
}

TEST(NtTable, MatchesNaiveRecursion) {
  for (double alpha : {0.01, 0.05, 0.1, 0.3, 0.5, 0.9}) {
    NaiveG g(alpha);
    const auto t = nt_build_table(alpha, 40);
    for (int n = 0; n <= 40; ++n)
      for (int m = 0; m <= n; ++m) EXPECT_NEAR(t.cost(m, n), g(m, n), 1e-9 * (1 + g(m, n))) << alpha << " " << m << " " << n;
  }
}

TEST(NtTable, ChoiceAttainsTheMinimum) {
  const double alpha = 0.07;
  const double q = 1.0 - alpha;
  const auto t = nt_build_table(alpha, 24);
  for (int n = 2; n <= 24; ++n) {
    const int x = t.choice(0, n);
    ASSERT_GE(x, 1);
    ASSERT_LE(x, n);
    const double qx = std::pow(q, x);
    EXPECT_NEAR(1.0 + qx * t.cost(0, n - x) + (1.0 - qx) * t.cost(x, n), t.cost(0, n), 1e-12);
  }
}

TEST(NtTable, IntroTableValues) {
  EXPECT_NEAR(nt_average_tests(0.05, 16), 4.753216, 1e-6);
  EXPECT_NEAR(nt_average_tests(0.10, 16), 7.694536, 1e-6);
  EXPECT_NEAR(nt_average_tests(0.20, 16), 11.734505, 1e-6);
  EXPECT_NEAR(nt_average_tests(0.05, 32), 9.376593, 1e-6);
  EXPECT_NEAR(nt_average_tests(0.10, 32), 15.244356, 1e-6);
  EXPECT_NEAR(nt_average_tests(0.20, 32), 23.379843, 1e-6);
}

TEST(NtTable, ClosedFormsAndErrors) {
  EXPECT_EQ(nt_average_tests(0.0, 20), 1.0);
  EXPECT_EQ(nt_average_tests(1.0, 20), 20.0);
  EXPECT_THROW(nt_build_table(1.5, 4), ConfigurationError);
  EXPECT_THROW(nt_build_table(0.1, 300), ConfigurationError);
  EXPECT_NO_THROW(nt_build_table(0.1, 300, 300));
}

TEST(NtTable, SharedCacheReturnsSameTable) {
  const auto a = shared_nt_table(0.05, 16);
  const auto b = shared_nt_table(0.05, 16);
  EXPECT_EQ(a.get(), b.get());
}

TEST(NtTable, JsonRoundTrip) {
  const auto t = nt_build_table(0.2, 12);
  const nlohmann::json j = t;
  const auto back = j.get<NtCostTable>();
  for (int n = 0; n <= 12; ++n)
    for (int m = 0; m <= n; ++m) EXPECT_EQ(back.cost(m, n), t.cost(m, n));
  nlohmann::json bad = j;
  bad["g"].erase(3);
  EXPECT_THROW(bad.get<NtCostTable>(), LoadError);
}

}  // namespace
}  // namespace pooltest
