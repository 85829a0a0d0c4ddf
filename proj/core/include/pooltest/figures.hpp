#pragma once

// Tabular datasets behind the figures: CSV with a header row, LF line endings and
// "%.9g" numbers, rows in a fixed order.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pooltest/test_model.hpp"

namespace pooltest {

struct FigureOptions {
  std::optional<int> n_min;
  std::optional<int> n_max;
  std::optional<int> d_max;
  std::vector<double> alphas;          // nt-avg
  std::optional<TestKitProfile> profile;
  std::optional<double> vp;            // pool-dilution
};

// replication, portions, pool-dilution, gbs-wc, mst-stages, mst-wc, gbs-vs-mst, nt-avg
const std::vector<std::string>& figure_keys();

// Throws ConfigurationError for an unknown key or an empty grid.
std::string figure_csv(std::string_view which, const FigureOptions& options = {});

// Test kit used when no profile is given: V50 = 1.02 copies and 93% sensitivity at five
// copies, with a 10% false-positive rate.
TestKitProfile default_figure_profile();

// ceil(log2 C(n, d)) + d, computed on exact integers.
int gbs_worst_case_tests(int n, int d);

}  // namespace pooltest
