#include "pooltest/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "pooltest/dilution.hpp"
#include "pooltest/errors.hpp"
#include "pooltest/rng.hpp"
#include "pooltest/session.hpp"

namespace pooltest {

namespace {

constexpr std::uint32_t kTruthStream = 0;
constexpr std::uint32_t kOutcomeStream = 1;
constexpr std::uint32_t kLoadStream = 2;

struct TrialResult {
  std::int64_t physical = 0;
  std::int64_t logical = 0;
  std::int64_t true_pos = 0;
  std::int64_t infected = 0;
  std::int64_t false_pos = 0;
  std::int64_t uninfected = 0;
  std::int64_t portions = 0;
  std::int64_t underestimates = 0;
  bool misdiagnosed = false;
};

struct Group {
  std::int64_t size = 0;
  std::int64_t infected = 0;
  double load = 0.0;
};

bool respond(const SimulationRequest& rq, const Group& g, double u) {
  const auto& o = rq.oracle;
  switch (o.kind) {
    case OutcomeOracle::Kind::kIdeal:
      return g.infected > 0;
    case OutcomeOracle::Kind::kFixedRate:
      return u < (g.infected > 0 ? 1.0 - o.gamma : o.beta);
    case OutcomeOracle::Kind::kNoisy:
      if (g.infected == 0) return u < o.profile.beta;
      return u < pooled_sensitivity_total(o.profile, g.size, g.load);
  }
  return false;
}

TrialResult run_trial(const SimulationRequest& rq, int portions, std::int64_t trial) {
  const int n = rq.planner.n;
  const auto t = static_cast<std::uint64_t>(trial);
  const TrialStream truth_rng(rq.seed, t, kTruthStream);
  const TrialStream load_rng(rq.seed, t, kLoadStream);
  const TrialStream outcome_rng(rq.seed, t, kOutcomeStream);

  std::vector<bool> infected(n, false);
  if (rq.truth.kind == TruthModel::Kind::kFixedD) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < rq.truth.d; ++k) {
      const int j = k + std::min(n - k - 1, static_cast<int>(truth_rng.uniform(k) * (n - k)));
      std::swap(order[k], order[j]);
      infected[order[k]] = true;
    }
  } else {
    for (int i = 0; i < n; ++i) infected[i] = truth_rng.uniform(i) < rq.truth.alpha;
  }
  std::vector<double> vp(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (!infected[i]) continue;
    if (rq.truth.vp_min == rq.truth.vp_max) {
      vp[i] = rq.truth.vp_min;
    } else {
      const double lo = std::log(rq.truth.vp_min);
      const double hi = std::log(rq.truth.vp_max);
      vp[i] = std::exp(lo + load_rng.uniform(i) * (hi - lo));
    }
  }

  ReplicatedRun run(rq.planner, rq.replication, std::nullopt);
  std::uint32_t read_index = 0;
  while (!run.terminal()) {
    const auto pending = run.pending();
    if (pending.empty()) throw std::logic_error("simulate: run stalled without pending reads");
    std::vector<GroupOutcome> outcomes;
    outcomes.reserve(pending.size());
    for (const auto& q : pending) {
      Group g;
      g.size = static_cast<std::int64_t>(q.members.size());
      for (SampleId m : q.members) {
        if (!infected[m]) continue;
        ++g.infected;
        g.load += vp[m] / portions;
      }
      outcomes.push_back({q.id, respond(rq, g, outcome_rng.uniform(read_index++))});
    }
    run.report(outcomes);
  }

  TrialResult r;
  r.physical = run.physical_tests();
  r.logical = run.logical_tests();
  r.underestimates = run.planner().underestimates();
  for (int i = 0; i < n; ++i) {
    const bool flagged = run.planner().diagnosis(i) == Diagnosis::kPositive;
    if (infected[i]) {
      ++r.infected;
      r.true_pos += flagged ? 1 : 0;
    } else {
      ++r.uninfected;
      r.false_pos += flagged ? 1 : 0;
    }
    if (flagged != infected[i]) r.misdiagnosed = true;
    r.portions += run.portions_used()[i];
  }
  return r;
}

CountStats count_stats(const std::vector<TrialResult>& results, std::int64_t TrialResult::*field) {
  CountStats s;
  const auto trials = static_cast<double>(results.size());
  double sum = 0.0;
  for (const auto& r : results) {
    const std::int64_t v = r.*field;
    sum += static_cast<double>(v);
    s.max = std::max(s.max, v);
    ++s.histogram[v];
  }
  s.mean = sum / trials;
  if (results.size() > 1) {
    double ss = 0.0;
    for (const auto& r : results) {
      const double dv = static_cast<double>(r.*field) - s.mean;
      ss += dv * dv;
    }
    s.std = std::sqrt(ss / (trials - 1.0));
  }
  return s;
}

PlannerState run_ideal(const PlannerConfig& planner, const std::vector<bool>& infected,
                       std::vector<GroupQuery>* log) {
  PlannerState state = planner_init(planner);
  std::vector<GroupOutcome> outcomes;
  while (!state.terminal()) {
    outcomes.clear();
    for (const auto& q : state.pending()) {
      bool positive = false;
      for (SampleId m : q.members) positive = positive || infected[m];
      outcomes.push_back({q.id, positive});
      if (log) log->push_back(q);
    }
    state = planner_observe(std::move(state), outcomes);
  }
  return state;
}

nlohmann::json to_json(const CountStats& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [count, trials] : s.histogram) hist.push_back({{"tests", count}, {"trials", trials}});
  return {{"mean", s.mean}, {"std", s.std}, {"max", s.max}, {"histogram", std::move(hist)}};
}

}  // namespace

TruthModel TruthModel::fixed(int d) {
  TruthModel t;
  t.kind = Kind::kFixedD;
  t.d = d;
  return t;
}

TruthModel TruthModel::bernoulli(double alpha) {
  TruthModel t;
  t.kind = Kind::kBernoulli;
  t.alpha = alpha;
  return t;
}

void TruthModel::validate(int n) const {
  if (kind == Kind::kFixedD && (d < 0 || d > n))
    throw ConfigurationError("truth: fixed d must lie in [0, n]");
  if (kind == Kind::kBernoulli && !(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigurationError("truth: alpha must lie in [0, 1]");
  if (!(vp_min > 0.0) || !(vp_max >= vp_min) || !std::isfinite(vp_max))
    throw ConfigurationError("truth: need 0 < vp_min <= vp_max");
}

OutcomeOracle OutcomeOracle::ideal() { return {}; }

OutcomeOracle OutcomeOracle::noisy(const TestKitProfile& profile, std::optional<int> portions) {
  OutcomeOracle o;
  o.kind = Kind::kNoisy;
  o.profile = profile;
  o.portions = portions;
  o.beta = profile.beta;
  return o;
}

OutcomeOracle OutcomeOracle::fixed_rate(double gamma, double beta) {
  OutcomeOracle o;
  o.kind = Kind::kFixedRate;
  o.gamma = gamma;
  o.beta = beta;
  return o;
}

void OutcomeOracle::validate() const {
  if (kind == Kind::kNoisy) {
    profile.validate();
    if (portions && *portions < 1) throw ConfigurationError("oracle: portions must be >= 1");
  }
  if (kind == Kind::kFixedRate &&
      !(gamma >= 0.0 && gamma <= 1.0 && beta >= 0.0 && beta <= 1.0))
    throw ConfigurationError("oracle: gamma and beta must lie in [0, 1]");
}

SimulationReport simulate(const SimulationRequest& rq) {
  if (rq.trials < 1) throw ConfigurationError("simulate: trials must be >= 1");
  rq.planner.validate();
  rq.truth.validate(rq.planner.n);
  rq.oracle.validate();
  rq.replication.validate();
  const int portions = rq.oracle.portions.value_or(
      per_sample_query_requirement(rq.planner) * rq.replication.max_reads());

  std::vector<TrialResult> results(static_cast<std::size_t>(rq.trials));
  results[0] = run_trial(rq, portions, 0);

  unsigned threads = rq.threads > 0 ? static_cast<unsigned>(rq.threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, rq.trials - 1));
  if (threads <= 1) {
    for (std::int64_t t = 1; t < rq.trials; ++t) results[t] = run_trial(rq, portions, t);
  } else {
    std::atomic<std::int64_t> next{1};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::int64_t t = next++; t < rq.trials; t = next++) {
          try {
            results[t] = run_trial(rq, portions, t);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            next = rq.trials;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  SimulationReport rep;
  rep.trials = rq.trials;
  rep.seed = rq.seed;
  rep.tests = count_stats(results, &TrialResult::physical);
  rep.logical_tests = count_stats(results, &TrialResult::logical);
  std::int64_t tp = 0, fp = 0, portions_total = 0;
  for (const auto& r : results) {
    tp += r.true_pos;
    fp += r.false_pos;
    rep.infected += r.infected;
    rep.uninfected += r.uninfected;
    portions_total += r.portions;
    rep.planner_failures += r.underestimates;
    rep.misdiagnosed_trials += r.misdiagnosed ? 1 : 0;
  }
  rep.sensitivity = rep.infected ? static_cast<double>(tp) / static_cast<double>(rep.infected) : 1.0;
  rep.fpr = rep.uninfected ? static_cast<double>(fp) / static_cast<double>(rep.uninfected) : 0.0;
  rep.mean_portions_per_sample =
      static_cast<double>(portions_total) / (static_cast<double>(rq.trials) * rq.planner.n);
  return rep;
}

Trace ideal_trace(const PlannerConfig& planner, const std::vector<bool>& infected) {
  planner.validate();
  if (static_cast<int>(infected.size()) != planner.n)
    throw ConfigurationError("ideal_trace: pattern length must equal n");
  Trace trace;
  const PlannerState state = run_ideal(planner, infected, &trace.queries);
  trace.positives = state.diagnosed_positive();
  trace.tests = state.queries_issued();
  return trace;
}

ExhaustiveReport exhaustive_sweep(const PlannerConfig& planner) {
  planner.validate();
  const int n = planner.n;
  if (n > kExhaustiveCap)
    throw ConfigurationError("exhaustive_sweep: n must be <= " + std::to_string(kExhaustiveCap));

  ExhaustiveReport rep;
  rep.planner = planner;
  double weighted = 0.0;
  double detect_weight = 0.0;
  double infected_weight = 0.0;
  std::vector<bool> infected(n, false);

  double exact_sum = 0.0;
  std::int64_t exact_patterns = 0;
  const auto visit = [&](double weight, bool exactly_d) {
    const PlannerState state = run_ideal(planner, infected, nullptr);
    const std::int64_t tests = state.queries_issued();
    ++rep.patterns;
    weighted += weight * static_cast<double>(tests);
    if (exactly_d) {
      exact_sum += static_cast<double>(tests);
      ++exact_patterns;
    }
    if (rep.patterns == 1 || tests > rep.worst_case) {
      rep.worst_case = tests;
      rep.certificate.clear();
      for (int i = 0; i < n; ++i)
        if (infected[i]) rep.certificate.push_back(i);
    }
    int found = 0, total = 0;
    for (int i = 0; i < n; ++i) {
      const bool flagged = state.diagnosis(i) == Diagnosis::kPositive;
      if (flagged != infected[i]) rep.all_correct = false;
      if (infected[i]) {
        ++total;
        found += flagged ? 1 : 0;
      }
    }
    if (total > 0) {
      infected_weight += weight * total;
      detect_weight += weight * found;
    }
    rep.max_queries_per_sample = std::max(rep.max_queries_per_sample, state.max_queries_per_sample());
    rep.max_round_queries_per_sample =
        std::max(rep.max_round_queries_per_sample, state.max_round_queries_per_sample());
    rep.planner_failures += state.underestimates();
  };

  if (planner.algorithm == Algorithm::kNt) {
    const double a = planner.alpha;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      int k = 0;
      for (int i = 0; i < n; ++i) {
        infected[i] = (mask >> i) & 1u;
        k += infected[i] ? 1 : 0;
      }
      const double w = std::pow(a, k) * std::pow(1.0 - a, n - k);
      visit(w, false);
    }
    rep.expected_tests = weighted;
    rep.expected_tests_at_most_d = weighted;
  } else {
    const int d = std::min(planner.d, n);
    std::vector<int> idx;
    for (int k = 0; k <= d; ++k) {
      idx.resize(k);
      std::iota(idx.begin(), idx.end(), 0);
      while (true) {
        std::fill(infected.begin(), infected.end(), false);
        for (int i : idx) infected[i] = true;
        visit(1.0, k == d);
        int pos = k - 1;
        while (pos >= 0 && idx[pos] == n - k + pos) --pos;
        if (pos < 0) break;
        ++idx[pos];
        for (int j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      }
    }
    rep.expected_tests = exact_sum / static_cast<double>(exact_patterns);
    rep.expected_tests_at_most_d = weighted / static_cast<double>(rep.patterns);
  }
  rep.detection_probability = infected_weight > 0.0 ? detect_weight / infected_weight : 1.0;
  return rep;
}

nlohmann::json to_json(const TruthModel& t) {
  nlohmann::json j;
  if (t.kind == TruthModel::Kind::kFixedD) {
    j = {{"kind", "fixed-d"}, {"d", t.d}};
  } else {
    j = {{"kind", "bernoulli"}, {"alpha", t.alpha}};
  }
  j["vp_min"] = t.vp_min;
  j["vp_max"] = t.vp_max;
  return j;
}

nlohmann::json to_json(const OutcomeOracle& o) {
  switch (o.kind) {
    case OutcomeOracle::Kind::kIdeal:
      return {{"kind", "ideal"}};
    case OutcomeOracle::Kind::kFixedRate:
      return {{"kind", "fixed-rate"}, {"gamma", o.gamma}, {"beta", o.beta}};
    case OutcomeOracle::Kind::kNoisy: {
      nlohmann::json j = {{"kind", "noisy"}, {"profile", o.profile}};
      if (o.portions) j["portions"] = *o.portions;
      return j;
    }
  }
  return {};
}

nlohmann::json to_json(const SimulationReport& r) {
  return {{"trials", r.trials},
          {"seed", r.seed},
          {"tests", to_json(r.tests)},
          {"logical_tests", to_json(r.logical_tests)},
          {"sensitivity", r.sensitivity},
          {"fpr", r.fpr},
          {"infected", r.infected},
          {"uninfected", r.uninfected},
          {"mean_portions_per_sample", r.mean_portions_per_sample},
          {"planner_failures", r.planner_failures},
          {"misdiagnosed_trials", r.misdiagnosed_trials},
          {"worst_case_label", r.worst_case_label}};
}

nlohmann::json to_json(const ExhaustiveReport& r) {
  return {{"planner", r.planner},
          {"patterns", r.patterns},
          {"expected_tests", r.expected_tests},
          {"expected_tests_at_most_d", r.expected_tests_at_most_d},
          {"worst_case", r.worst_case},
          {"certificate", r.certificate},
          {"all_correct", r.all_correct},
          {"detection_probability", r.detection_probability},
          {"max_queries_per_sample", r.max_queries_per_sample},
          {"max_round_queries_per_sample", r.max_round_queries_per_sample},
          {"planner_failures", r.planner_failures},
          {"worst_case_label", r.worst_case_label}};
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string histogram_csv(const SimulationReport& r) {
  std::string out = "tests,trials,fraction\n";
  for (const auto& [count, trials] : r.tests.histogram) {
    out += std::to_string(count) + "," + std::to_string(trials) + "," +
           format_number(static_cast<double>(trials) / static_cast<double>(r.trials)) + "\n";
  }
  return out;
}

}  // namespace pooltest
