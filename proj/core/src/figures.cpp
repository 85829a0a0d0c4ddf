#include "pooltest/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pooltest/dilution.hpp"
#include "pooltest/errors.hpp"
#include "pooltest/nt_table.hpp"
#include "pooltest/planners.hpp"
#include "pooltest/simulator.hpp"

namespace pooltest {

namespace {

class Csv {
 public:
  explicit Csv(std::string header) : out_(std::move(header) + "\n") {}

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ += (first ? "" : ","), out_ += cell(cells), first = false), ...);
    out_ += "\n";
  }

  std::string str() && { return std::move(out_); }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::int64_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const char* v) { return v; }

  std::string out_;
};

struct Range {
  int lo;
  int hi;
};

Range n_range(const FigureOptions& o, int lo, int hi) {
  Range r{o.n_min.value_or(lo), o.n_max.value_or(hi)};
  if (r.lo < 1 || r.hi < r.lo) throw ConfigurationError("figure: need 1 <= n_min <= n_max");
  return r;
}

int d_max(const FigureOptions& o, int def) {
  const int d = o.d_max.value_or(def);
  if (d < 1) throw ConfigurationError("figure: d_max must be >= 1");
  return d;
}

std::string replication_table() {
  Csv csv("panel,x,r,m,value");
  for (int i = 1; i <= 50; ++i) {
    const double gamma = i / 100.0;
    for (int r = 1; r <= 3; ++r) csv.row("sensitivity", gamma, r, 0, 1.0 - gamma_r(gamma, r));
  }
  for (int i = 1; i <= 30; ++i) {
    const double alpha = i / 100.0;
    for (int r = 1; r <= 3; ++r) {
      for (int m = (r + 1) / 2; m <= r; ++m) {
        const auto a = apr(alpha, 0.05, 0.1, r, m);
        csv.row("apr", alpha, r, m, a.value);
      }
    }
  }
  return std::move(csv).str();
}

std::string portions_table(const FigureOptions& o) {
  const TestKitProfile profile = o.profile.value_or(default_figure_profile());
  Csv csv("vl,gamma_star,r,required_load,portions,usable");
  for (double gamma_star : {0.01, 0.02, 0.05, 0.1}) {
    const double load = required_load(profile, gamma_star, 3);
    for (int e = 0; e <= 24; ++e) {
      const double vl = std::pow(10.0, 2.0 + e * 0.25);
      const auto p = max_portions(vl, load);
      csv.row(vl, gamma_star, 3, load, p.portions, p.usable);
    }
  }
  return std::move(csv).str();
}

std::string pool_dilution_table(const FigureOptions& o) {
  TestKitProfile profile;
  profile.v50 = 100.0;
  profile.v95 = 1000.0;
  profile.beta = 0.0;
  profile = o.profile.value_or(profile);
  const double vp = o.vp.value_or(1e4);
  const Range n = n_range(o, 1, 128);
  Csv csv("n,d,load_per_portion,sensitivity");
  for (int d : {1, 2, 4, 8}) {
    for (int k = std::max(n.lo, d); k <= n.hi; ++k) {
      const double load = d * vp / k;
      csv.row(k, d, load, pooled_sensitivity({profile, k, d, vp}));
    }
  }
  return std::move(csv).str();
}

std::string gbs_wc_table(const FigureOptions& o) {
  const Range n = n_range(o, 8, 64);
  const int dm = d_max(o, 6);
  Csv csv("n,d,worst_case,worst_case_r2,conventional_r2");
  for (int k = n.lo; k <= n.hi; ++k) {
    for (int d = 1; d <= std::min(dm, k); ++d) {
      const int wc = gbs_worst_case_tests(k, d);
      csv.row(k, d, wc, 2 * wc, 2 * k);
    }
  }
  return std::move(csv).str();
}

std::string mst_stages_table(const FigureOptions& o) {
  const Range n = n_range(o, 8, 64);
  const int dm = d_max(o, 6);
  Csv csv("n,d,stages");
  for (int k = n.lo; k <= n.hi; ++k)
    for (int d = 1; d <= std::min(dm, k - 1); ++d) csv.row(k, d, mst_optimal_stages(k, d));
  return std::move(csv).str();
}

std::string mst_wc_table(const FigureOptions& o) {
  const Range n = n_range(o, 8, 64);
  const int dm = d_max(o, 6);
  Csv csv("n,d,stages,worst_case,worst_case_r2,bound,conventional_r2");
  for (int k = n.lo; k <= n.hi; ++k) {
    for (int d = 1; d <= std::min(dm, k - 1); ++d) {
      const int wc = mst_worst_case_tests(k, d);
      csv.row(k, d, mst_optimal_stages(k, d), wc, 2 * wc, mst_worst_case_bound(k, d), 2 * k);
    }
  }
  return std::move(csv).str();
}

std::string gbs_vs_mst_table(const FigureOptions& o) {
  const Range n = n_range(o, 8, 48);
  const int dm = d_max(o, 6);
  Csv csv("n,d,gbs_worst_case,mst_worst_case,conventional,gbs_exceeds_conventional,"
          "mst_within_conventional");
  for (int k = n.lo; k <= n.hi; ++k) {
    for (int d = 1; d <= std::min(dm, k - 1); ++d) {
      const int gbs = gbs_worst_case_tests(k, d);
      const int mst = mst_worst_case_tests(k, d);
      csv.row(k, d, gbs, mst, k, gbs > k, mst <= k);
    }
  }
  return std::move(csv).str();
}

std::string nt_avg_table(const FigureOptions& o) {
  const Range n = n_range(o, 2, 64);
  std::vector<double> alphas = o.alphas;
  if (alphas.empty()) alphas = {0.01, 0.05, 0.1, 0.2, 0.3};
  Csv csv("n,alpha,expected_tests,conventional,savings");
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigurationError("figure: alpha must lie in (0, 1)");
    const auto table = shared_nt_table(alpha, n.hi);
    for (int k = n.lo; k <= n.hi; ++k) {
      const double g = table->cost(0, k);
      csv.row(k, alpha, g, k, 1.0 - g / k);
    }
  }
  return std::move(csv).str();
}

}  // namespace

TestKitProfile default_figure_profile() {
  TestKitProfile p;
  p.v50 = 1.02;
  p.v95 = calibrate_v95(1.02, 5.0, 0.93);
  p.beta = 0.1;
  return p;
}

int gbs_worst_case_tests(int n, int d) {
  if (n < 1 || d < 0 || d > n) throw ConfigurationError("gbs_worst_case_tests: need 0 <= d <= n");
  // Exact C(n, d) in 128 bits is enough for n <= 125.
  if (n > 125) return static_cast<int>(std::ceil(gbs_worst_case_bound(n, d) - 1e-9));
  unsigned __int128 c = 1;
  const int k = std::min(d, n - d);
  for (int i = 1; i <= k; ++i) c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
  int bits = 0;
  while ((static_cast<unsigned __int128>(1) << bits) < c) ++bits;
  return bits + d;
}

const std::vector<std::string>& figure_keys() {
  static const std::vector<std::string> keys = {"replication", "portions",   "pool-dilution",
                                                "gbs-wc",      "mst-stages", "mst-wc",
                                                "gbs-vs-mst",  "nt-avg"};
  return keys;
}

std::string figure_csv(std::string_view which, const FigureOptions& o) {
  if (which == "replication") return replication_table();
  if (which == "portions") return portions_table(o);
  if (which == "pool-dilution") return pool_dilution_table(o);
  if (which == "gbs-wc") return gbs_wc_table(o);
  if (which == "mst-stages") return mst_stages_table(o);
  if (which == "mst-wc") return mst_wc_table(o);
  if (which == "gbs-vs-mst") return gbs_vs_mst_table(o);
  if (which == "nt-avg") return nt_avg_table(o);
  throw ConfigurationError("unknown figure key '" + std::string(which) + "'");
}

}  // namespace pooltest
