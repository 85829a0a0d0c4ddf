#include "pooltest/planners.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <unordered_map>

#include "pooltest/errors.hpp"

namespace pooltest {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kGbs: return "gbs";
    case Algorithm::kMst: return "mst";
    case Algorithm::kNt: return "nt";
    case Algorithm::kIndividual: return "individual";
  }
  return "gbs";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "gbs" || text == "GBS") return Algorithm::kGbs;
  if (text == "mst" || text == "MST") return Algorithm::kMst;
  if (text == "nt" || text == "NT") return Algorithm::kNt;
  if (text == "individual") return Algorithm::kIndividual;
  throw ConfigurationError("unknown algorithm '" + std::string(text) + "'");
}

void PlannerConfig::validate() const {
  if (n < 1) throw ConfigurationError("n must be >= 1");
  switch (algorithm) {
    case Algorithm::kGbs:
      if (d < 0 || d >= n) throw ConfigurationError("GBS needs 0 <= d < n");
      break;
    case Algorithm::kMst:
      if (d < 1 || d >= n) throw ConfigurationError("MST needs 1 <= d < n");
      if (stages && *stages < 1) throw ConfigurationError("MST needs stages >= 1");
      break;
    case Algorithm::kNt:
      if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigurationError("NT needs 0 < alpha < 1");
      if (n > nt_table_cap)
        throw ConfigurationError("NT: n = " + std::to_string(n) + " exceeds the table cap " +
                                 std::to_string(nt_table_cap));
      break;
    case Algorithm::kIndividual:
      break;
  }
}

// ---------------------------------------------------------------------------
// Closed-form quantities
// ---------------------------------------------------------------------------

int mst_optimal_stages(int n, int d) {
  if (d < 1 || d >= n) throw ConfigurationError("mst_optimal_stages: need 1 <= d < n");
  const double delta = static_cast<double>(n) / d;
  const double l = std::log(delta);
  int best_x = 0;
  double best = INFINITY;
  for (double c : {std::floor(l), std::ceil(l)}) {
    const int x = std::max(1, static_cast<int>(c));
    const double cost = x * d * std::pow(delta, 1.0 / x);
    if (cost < best || (cost == best && x < best_x)) {
      best = cost;
      best_x = x;
    }
  }
  return best_x;
}

double gbs_worst_case_bound(int n, int d) {
  if (n < 1 || d < 0 || d > n) throw ConfigurationError("gbs_worst_case_bound: need 0 <= d <= n");
  // log2 C(n, d) via lgamma.
  const double log_binom = std::lgamma(n + 1.0) - std::lgamma(d + 1.0) - std::lgamma(n - d + 1.0);
  return log_binom * std::numbers::log2e + d;
}

double mst_worst_case_bound(int n, int d) {
  if (d < 1 || d > n) throw ConfigurationError("mst_worst_case_bound: need 1 <= d <= n");
  return std::numbers::e * d * std::log(static_cast<double>(n) / d);
}

double mst_inherent_replication_savings(int n, int d, int s) {
  if (d < 1 || d > n || s < 1)
    throw ConfigurationError("mst_inherent_replication_savings: need 1 <= d <= n, s >= 1");
  if (d == n) return 0.0;
  const double ratio = static_cast<double>(d) / n;
  const double k1 = std::pow(1.0 / ratio, 1.0 - 1.0 / s);
  return k1 * (1.0 - ratio) / (1.0 - std::pow(ratio, 1.0 / s));
}

int mst_group_count(int queued, int stage, int stages, double delta) {
  if (queued <= 0) return 0;
  if (stage >= stages) return queued;
  const double k = std::pow(delta, 1.0 - static_cast<double>(stage) / stages);
  const auto g = static_cast<int>(std::floor(queued / k + 0.5));
  return std::clamp(g, 1, queued);
}

std::vector<int> mst_group_sizes(int count, int groups) {
  std::vector<int> sizes(groups, count / groups);
  for (int i = 0; i < count % groups; ++i) ++sizes[i];
  return sizes;
}

int mst_worst_case_tests(int n, int d, std::optional<int> stages) {
  if (d < 1 || d >= n) throw ConfigurationError("mst_worst_case_tests: need 1 <= d < n");
  const int s = stages ? *stages : mst_optimal_stages(n, d);
  const double delta = static_cast<double>(n) / d;
  std::map<std::pair<int, int>, int> memo;

  // Any choice of at most d positive groups per stage is realizable by placing one
  // infected sample in each (checked against exhaustive enumeration in the tests).
  auto worst = [&](auto&& self, int queued, int stage) -> int {
    if (queued == 0) return 0;
    auto it = memo.find({queued, stage});
    if (it != memo.end()) return it->second;
    const int g = mst_group_count(queued, stage, s, delta);
    int result = g;
    if (stage < s) {
      const int small = queued / g;
      const int n_big = queued % g;
      const int n_small = g - n_big;
      const int big = small + 1;
      int best = 0;
      for (int a = 0; a <= std::min(d, n_big); ++a) {
        for (int b = 0; b <= std::min(d - a, n_small); ++b) {
          const int next = (big > 1 ? a * big : 0) + (small > 1 ? b * small : 0);
          best = std::max(best, self(self, next, stage + 1));
        }
      }
      result += best;
    }
    memo[{queued, stage}] = result;
    return result;
  };
  return worst(worst, n, 1);
}

int per_sample_query_requirement(const PlannerConfig& config) {
  switch (config.algorithm) {
    case Algorithm::kGbs:
      if (config.d < 1) return 1;
      return static_cast<int>(std::floor(std::log2(static_cast<double>(config.n) / config.d))) + 1;
    case Algorithm::kMst:
      return config.stages ? *config.stages : mst_optimal_stages(config.n, config.d);
    case Algorithm::kNt:
      return static_cast<int>(std::ceil(std::log2(static_cast<double>(config.n)))) + 1;
    case Algorithm::kIndividual:
      return 1;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// PlannerState accessors
// ---------------------------------------------------------------------------

namespace {

std::vector<SampleId> collect(const std::vector<SampleId>& samples,
                              const std::vector<Diagnosis>& status, Diagnosis want) {
  std::vector<SampleId> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (status[i] == want) out.push_back(samples[i]);
  return out;
}

void erase_members(std::vector<int>& from, const std::vector<int>& members) {
  std::erase_if(from, [&](int x) {
    return std::find(members.begin(), members.end(), x) != members.end();
  });
}

}  // namespace

std::vector<SampleId> PlannerState::undiagnosed() const {
  return collect(samples_, status_, Diagnosis::kUndiagnosed);
}
std::vector<SampleId> PlannerState::diagnosed_positive() const {
  return collect(samples_, status_, Diagnosis::kPositive);
}
std::vector<SampleId> PlannerState::diagnosed_negative() const {
  return collect(samples_, status_, Diagnosis::kNegative);
}

int PlannerState::max_queries_per_sample() const {
  return per_sample_.empty() ? 0 : *std::max_element(per_sample_.begin(), per_sample_.end());
}

int PlannerState::mst_stages() const {
  if (const auto* m = std::get_if<detail::MstState>(&alg_)) return m->s;
  return 0;
}

int PlannerState::mst_stage() const {
  if (const auto* m = std::get_if<detail::MstState>(&alg_)) return m->stage;
  return 0;
}

std::string PlannerState::check_invariants() const {
  if (status_.size() != samples_.size() || per_sample_.size() != samples_.size())
    return "bin vectors do not cover the pool";
  std::unordered_map<SampleId, std::size_t> index;
  for (std::size_t i = 0; i < samples_.size(); ++i) index[samples_[i]] = i;
  std::set<QueryId> ids;
  for (const auto& q : pending_) {
    if (!ids.insert(q.id).second) return "duplicate pending query id";
    if (q.members.empty()) return "empty pending query";
    std::set<SampleId> seen;
    for (SampleId m : q.members) {
      auto it = index.find(m);
      if (it == index.end()) return "pending query names an unknown sample";
      if (!seen.insert(m).second) return "pending query repeats a sample";
      if (status_[it->second] != Diagnosis::kUndiagnosed)
        return "pending query names a diagnosed sample";
    }
  }
  const bool any_undiagnosed =
      std::find(status_.begin(), status_.end(), Diagnosis::kUndiagnosed) != status_.end();
  if (any_undiagnosed == pending_.empty()) return "terminal flag disagrees with undiagnosed bin";
  return {};
}

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

struct PlannerOps {
  static void issue(PlannerState& s, const std::vector<int>& members) {
    GroupQuery q;
    q.id = s.next_query_id_++;
    q.members.reserve(members.size());
    for (int i : members) {
      q.members.push_back(s.samples_[i]);
      ++s.per_sample_[i];
    }
    s.pending_.push_back(std::move(q));
  }

  static void mark(PlannerState& s, const std::vector<int>& members, Diagnosis d) {
    for (int i : members) s.status_[i] = d;
  }

  // --- GBS -----------------------------------------------------------------

  static void gbs_issue(PlannerState& s, detail::GbsState& g, std::vector<int> members) {
    if (g.phase == detail::GbsState::Phase::kGroup || g.phase == detail::GbsState::Phase::kBsp) {
      for (int i : members) s.max_round_ = std::max(s.max_round_, ++g.round_counts[i]);
    }
    g.tested = std::move(members);
    issue(s, g.tested);
  }

  static void gbs_schedule(PlannerState& s, detail::GbsState& g) {
    using Phase = detail::GbsState::Phase;
    const int n_left = static_cast<int>(g.pool.size());
    if (g.d > 0 && n_left > 0 && n_left >= 2 * g.d - 1) {
      const int ratio = (n_left - g.d + 1) / g.d;
      const int size = std::min(n_left, static_cast<int>(std::bit_floor(static_cast<unsigned>(ratio))));
      g.phase = Phase::kGroup;
      std::fill(g.round_counts.begin(), g.round_counts.end(), 0);
      gbs_issue(s, g, std::vector<int>(g.pool.begin(), g.pool.begin() + size));
      return;
    }
    if (g.d > 0 && n_left > 0) {
      g.phase = Phase::kIndividual;
      gbs_issue(s, g, {g.pool.front()});
      return;
    }
    if (n_left > 0 && s.config_.verify) {
      g.phase = Phase::kVerify;
      gbs_issue(s, g, g.pool);
      return;
    }
    mark(s, g.pool, Diagnosis::kNegative);
    g.pool.clear();
    g.tested.clear();
    g.phase = Phase::kDone;
  }

  static void gbs_bsp_step(PlannerState& s, detail::GbsState& g) {
    const auto half = (g.active.size() + 1) / 2;
    gbs_issue(s, g, std::vector<int>(g.active.begin(), g.active.begin() + half));
  }

  static void gbs_found(PlannerState& s, detail::GbsState& g, int sample) {
    s.status_[sample] = Diagnosis::kPositive;
    g.d = std::max(0, g.d - 1);
    g.active.clear();
    gbs_schedule(s, g);
  }

  static void gbs_observe(PlannerState& s, detail::GbsState& g, bool positive) {
    using Phase = detail::GbsState::Phase;
    std::vector<int> tested = std::move(g.tested);
    g.tested.clear();
    switch (g.phase) {
      case Phase::kGroup:
        erase_members(g.pool, tested);
        if (!positive) {
          mark(s, tested, Diagnosis::kNegative);
          gbs_schedule(s, g);
        } else if (tested.size() == 1) {
          gbs_found(s, g, tested.front());
        } else {
          g.active = std::move(tested);
          g.phase = Phase::kBsp;
          gbs_bsp_step(s, g);
        }
        return;
      case Phase::kBsp: {
        std::vector<int> rest(g.active.begin() + tested.size(), g.active.end());
        if (positive) {
          // The untested half goes back to the pool, which stays in initial order.
          g.pool.insert(g.pool.end(), rest.begin(), rest.end());
          std::sort(g.pool.begin(), g.pool.end());
          g.active = std::move(tested);
        } else {
          mark(s, tested, Diagnosis::kNegative);
          g.active = std::move(rest);
        }
        if (g.active.size() == 1) {
          gbs_found(s, g, g.active.front());
        } else {
          gbs_bsp_step(s, g);
        }
        return;
      }
      case Phase::kIndividual:
        erase_members(g.pool, tested);
        if (positive) {
          s.status_[tested.front()] = Diagnosis::kPositive;
          g.d = std::max(0, g.d - 1);
        } else {
          s.status_[tested.front()] = Diagnosis::kNegative;
        }
        // Every sample left when the splitting loop stopped is tested on its own.
        if (!g.pool.empty()) {
          gbs_issue(s, g, {g.pool.front()});
        } else {
          g.phase = Phase::kDone;
        }
        return;
      case Phase::kVerify:
        if (!positive) {
          mark(s, g.pool, Diagnosis::kNegative);
          g.pool.clear();
          g.phase = Phase::kDone;
        } else {
          ++s.underestimates_;
          g.d = 1;
          gbs_schedule(s, g);
        }
        return;
      case Phase::kDone:
        return;
    }
  }

  // --- MST -----------------------------------------------------------------

  static void mst_schedule(PlannerState& s, detail::MstState& m) {
    const int queued = static_cast<int>(m.qsb.size());
    const int g = mst_group_count(queued, m.stage, m.s, m.delta);
    m.groups.clear();
    std::size_t pos = 0;
    for (int size : mst_group_sizes(queued, g)) {
      m.groups.emplace_back(m.qsb.begin() + pos, m.qsb.begin() + pos + size);
      pos += size;
    }
    for (const auto& group : m.groups) issue(s, group);
  }

  static void mst_observe(PlannerState& s, detail::MstState& m, const std::vector<bool>& results) {
    std::vector<int> next;
    int positive_groups = 0;
    int open_groups = 0;
    for (std::size_t i = 0; i < m.groups.size(); ++i) {
      const auto& group = m.groups[i];
      if (!results[i]) {
        mark(s, group, Diagnosis::kNegative);
        continue;
      }
      ++positive_groups;
      if (group.size() == 1) {
        s.status_[group.front()] = Diagnosis::kPositive;
      } else {
        ++open_groups;
        next.insert(next.end(), group.begin(), group.end());
      }
    }
    m.groups.clear();
    m.qsb = std::move(next);
    if (m.qsb.empty()) return;
    if (positive_groups > m.d) {
      // d was too small: restart MST on the queued samples with what we now know.
      ++s.underestimates_;
      m.d = std::max(1, open_groups);
      const int queued = static_cast<int>(m.qsb.size());
      m.s = mst_optimal_stages(queued, m.d);
      m.delta = static_cast<double>(queued) / m.d;
      m.stage = 1;
    } else {
      ++m.stage;
    }
    mst_schedule(s, m);
  }

  // --- NT ------------------------------------------------------------------

  static void nt_schedule(PlannerState& s, detail::NtState& t) {
    if (t.pib.empty()) {
      if (t.ub.empty()) return;
      const int h = t.table->choice(0, static_cast<int>(t.ub.size()));
      t.tested.assign(t.ub.begin(), t.ub.begin() + h);
    } else {
      const int m = static_cast<int>(t.pib.size());
      const int g = t.table->choice(m, m + static_cast<int>(t.ub.size()));
      t.tested.assign(t.pib.begin(), t.pib.begin() + g);
    }
    issue(s, t.tested);
  }

  static void nt_observe(PlannerState& s, detail::NtState& t, bool positive) {
    std::vector<int> tested = std::move(t.tested);
    t.tested.clear();
    if (t.pib.empty()) {
      erase_members(t.ub, tested);
      if (!positive) {
        mark(s, tested, Diagnosis::kNegative);
      } else {
        t.pib = std::move(tested);
      }
    } else if (positive) {
      std::vector<int> rest(t.pib.begin() + tested.size(), t.pib.end());
      t.ub.insert(t.ub.begin(), rest.begin(), rest.end());
      t.pib = std::move(tested);
    } else {
      mark(s, tested, Diagnosis::kNegative);
      t.pib.erase(t.pib.begin(), t.pib.begin() + tested.size());
    }
    if (t.pib.size() == 1) {
      s.status_[t.pib.front()] = Diagnosis::kPositive;
      t.pib.clear();
    }
    nt_schedule(s, t);
  }
};

PlannerState planner_init(const PlannerConfig& config, std::vector<SampleId> sample_ids) {
  config.validate();
  PlannerState s;
  s.config_ = config;
  if (sample_ids.empty()) {
    sample_ids.resize(config.n);
    for (int i = 0; i < config.n; ++i) sample_ids[i] = i;
  }
  if (static_cast<int>(sample_ids.size()) != config.n)
    throw ConfigurationError("sample id count does not match n");
  if (std::set<SampleId>(sample_ids.begin(), sample_ids.end()).size() != sample_ids.size())
    throw ConfigurationError("sample ids must be distinct");
  s.samples_ = std::move(sample_ids);
  s.status_.assign(config.n, Diagnosis::kUndiagnosed);
  s.per_sample_.assign(config.n, 0);

  std::vector<int> all(config.n);
  for (int i = 0; i < config.n; ++i) all[i] = i;

  switch (config.algorithm) {
    case Algorithm::kGbs: {
      detail::GbsState g;
      g.d = config.d;
      g.pool = all;
      g.round_counts.assign(config.n, 0);
      s.alg_ = std::move(g);
      PlannerOps::gbs_schedule(s, std::get<detail::GbsState>(s.alg_));
      break;
    }
    case Algorithm::kMst: {
      detail::MstState m;
      m.d = config.d;
      m.s = config.stages ? *config.stages : mst_optimal_stages(config.n, config.d);
      m.stage = 1;
      m.delta = static_cast<double>(config.n) / config.d;
      m.qsb = all;
      s.alg_ = std::move(m);
      PlannerOps::mst_schedule(s, std::get<detail::MstState>(s.alg_));
      break;
    }
    case Algorithm::kNt: {
      detail::NtState t;
      t.alpha = config.alpha;
      t.table = shared_nt_table(config.alpha, config.n, config.nt_table_cap);
      t.ub = all;
      s.alg_ = std::move(t);
      PlannerOps::nt_schedule(s, std::get<detail::NtState>(s.alg_));
      break;
    }
    case Algorithm::kIndividual:
      s.alg_ = detail::IndividualState{};
      for (int i : all) PlannerOps::issue(s, {i});
      break;
  }
  return s;
}

std::vector<GroupQuery> planner_next(const PlannerState& state) {
  if (state.terminal()) throw UsageError("planner_next: planner is terminal");
  return {state.pending().begin(), state.pending().end()};
}

PlannerState planner_observe(PlannerState state, std::span<const GroupOutcome> outcomes) {
  if (state.terminal()) throw UsageError("planner_observe: planner is terminal");
  std::unordered_map<QueryId, bool> by_id;
  for (const auto& o : outcomes) {
    if (!by_id.emplace(o.id, o.positive).second)
      throw ProtocolError("duplicate outcome for query " + std::to_string(o.id));
  }
  std::vector<bool> results;
  results.reserve(state.pending_.size());
  for (const auto& q : state.pending_) {
    auto it = by_id.find(q.id);
    if (it == by_id.end()) throw ProtocolError("missing outcome for query " + std::to_string(q.id));
    results.push_back(it->second);
    by_id.erase(it);
  }
  if (!by_id.empty())
    throw ProtocolError("outcome for unknown query " + std::to_string(by_id.begin()->first));

  const std::vector<GroupQuery> answered = std::move(state.pending_);
  state.pending_.clear();
  std::visit(
      [&](auto& alg) {
        using T = std::decay_t<decltype(alg)>;
        if constexpr (std::is_same_v<T, detail::GbsState>) {
          PlannerOps::gbs_observe(state, alg, results.front());
        } else if constexpr (std::is_same_v<T, detail::MstState>) {
          PlannerOps::mst_observe(state, alg, results);
        } else if constexpr (std::is_same_v<T, detail::NtState>) {
          PlannerOps::nt_observe(state, alg, results.front());
        } else {
          std::unordered_map<SampleId, int> index;
          for (std::size_t i = 0; i < state.samples_.size(); ++i)
            index[state.samples_[i]] = static_cast<int>(i);
          for (std::size_t i = 0; i < answered.size(); ++i)
            state.status_[index.at(answered[i].members.front())] =
                results[i] ? Diagnosis::kPositive : Diagnosis::kNegative;
        }
      },
      state.alg_);
  return state;
}

}  // namespace pooltest
