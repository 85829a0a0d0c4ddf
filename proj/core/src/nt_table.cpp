#include "pooltest/nt_table.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "pooltest/errors.hpp"

namespace pooltest {

double NtCostTable::cost(int m, int n) const {
  if (n < 0 || n > n_max_ || m < 0 || m > n)
    throw ConfigurationError("NtCostTable::cost: (m, n) outside table");
  return g_[index(m, n)];
}

int NtCostTable::choice(int m, int n) const {
  if (n < 1 || n > n_max_ || m < 0 || m > n || m == 1)
    throw ConfigurationError("NtCostTable::choice: (m, n) has no split");
  return x_[index(m, n)];
}

NtCostTable nt_build_table(double alpha, int n_max, int cap) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigurationError("nested testing: alpha must lie in (0, 1)");
  if (n_max < 1) throw ConfigurationError("nested testing: n must be >= 1");
  if (n_max > cap)
    throw ConfigurationError("nested testing: n = " + std::to_string(n_max) +
                             " exceeds the table cap " + std::to_string(cap));

  NtCostTable t;
  t.alpha_ = alpha;
  t.n_max_ = n_max;
  const std::size_t size = t.index(n_max, n_max) + 1;
  t.g_.assign(size, 0.0);
  t.x_.assign(size, 0);

  // q^x and 1 - q^x for x = 0..n_max; expm1 keeps 1 - q^x accurate for small alpha.
  const double log_q = std::log1p(-alpha);
  std::vector<double> qx(n_max + 1), px(n_max + 1);
  for (int x = 0; x <= n_max; ++x) {
    qx[x] = std::exp(x * log_q);
    px[x] = -std::expm1(x * log_q);
  }

  auto G = [&t](int m, int n) -> double& { return t.g_[t.index(m, n)]; };
  for (int n = 1; n <= n_max; ++n) {
    G(1, n) = G(0, n - 1);
    for (int m = 2; m <= n; ++m) {
      double best = INFINITY;
      int arg = 0;
      for (int x = 1; x < m; ++x) {
        const double v = 1.0 + (qx[x] - qx[m]) / px[m] * G(m - x, n - x) + px[x] / px[m] * G(x, n);
        if (v < best) {
          best = v;
          arg = x;
        }
      }
      G(m, n) = best;
      t.x_[t.index(m, n)] = arg;
    }
    double best = INFINITY;
    int arg = 0;
    for (int x = 1; x <= n; ++x) {
      const double v = 1.0 + qx[x] * G(0, n - x) + px[x] * G(x, n);
      if (v < best) {
        best = v;
        arg = x;
      }
    }
    G(0, n) = best;
    t.x_[t.index(0, n)] = arg;
  }
  return t;
}

std::shared_ptr<const NtCostTable> shared_nt_table(double alpha, int n_max, int cap) {
  static std::mutex mu;
  static std::map<std::pair<double, int>, std::shared_ptr<const NtCostTable>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({alpha, n_max});
    if (it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const NtCostTable>(nt_build_table(alpha, n_max, cap));
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::make_pair(alpha, n_max), std::move(table)).first->second;
}

double nt_average_tests(double alpha, int n, int cap) {
  if (n < 1) throw ConfigurationError("nt_average_tests: n must be >= 1");
  if (alpha == 0.0) return 1.0;
  if (alpha == 1.0) return static_cast<double>(n);
  if (n > cap)
    throw ConfigurationError("nt_average_tests: n = " + std::to_string(n) +
                             " exceeds the table cap " + std::to_string(cap));
  return shared_nt_table(alpha, n, cap)->cost(0, n);
}

void to_json(nlohmann::json& j, const NtCostTable& t) {
  nlohmann::json g = nlohmann::json::array();
  nlohmann::json choice = nlohmann::json::array();
  for (int n = 0; n <= t.n_max_; ++n) {
    nlohmann::json grow = nlohmann::json::array();
    nlohmann::json crow = nlohmann::json::array();
    for (int m = 0; m <= n; ++m) {
      grow.push_back(t.g_[t.index(m, n)]);
      crow.push_back(t.x_[t.index(m, n)]);
    }
    g.push_back(std::move(grow));
    choice.push_back(std::move(crow));
  }
  j = {{"alpha", t.alpha_}, {"n_max", t.n_max_}, {"g", std::move(g)}, {"choice", std::move(choice)}};
}

void from_json(const nlohmann::json& j, NtCostTable& t) {
  try {
    t.alpha_ = j.at("alpha").get<double>();
    t.n_max_ = j.at("n_max").get<int>();
    if (t.n_max_ < 0) throw LoadError("nt table: negative n_max");
    const auto& g = j.at("g");
    const auto& choice = j.at("choice");
    if (g.size() != static_cast<std::size_t>(t.n_max_) + 1 || choice.size() != g.size())
      throw LoadError("nt table: row count does not match n_max");
    t.g_.clear();
    t.x_.clear();
    for (int n = 0; n <= t.n_max_; ++n) {
      if (g[n].size() != static_cast<std::size_t>(n) + 1 || choice[n].size() != g[n].size())
        throw LoadError("nt table: row " + std::to_string(n) + " has the wrong length");
      for (int m = 0; m <= n; ++m) {
        t.g_.push_back(g[n][m].get<double>());
        t.x_.push_back(choice[n][m].get<std::int32_t>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("nt table: ") + e.what());
  }
}

}  // namespace pooltest
