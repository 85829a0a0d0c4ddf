#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pooltest/dilution.hpp"
#include "pooltest/errors.hpp"
#include "pooltest/figures.hpp"
#include "pooltest/nt_table.hpp"
#include "pooltest/planners.hpp"
#include "pooltest/session.hpp"
#include "pooltest/simulator.hpp"

namespace pooltest::cli {

namespace {

// Flag combinations the command line cannot accept.
class CliUsage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlannerFlags {
  std::string alg;
  int n = 0;
  int d = -1;
  double alpha = -1.0;
  int stages = 0;
  bool verify = false;
  CLI::Option* d_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* stages_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--alg", alg, "gbs, mst, nt or individual")
        ->required()
        ->check(CLI::IsMember({"gbs", "mst", "nt", "individual"}));
    app->add_option("--n", n, "number of samples")->required();
    d_opt = app->add_option("--d", d, "upper bound on infected samples (gbs, mst)");
    alpha_opt = app->add_option("--alpha", alpha, "prior infection probability (nt)");
    stages_opt = app->add_option("--stages", stages, "MST stage count override");
    app->add_flag("--verify", verify, "GBS: test the presumed negatives once more at the end");
  }

  PlannerConfig config() const {
    PlannerConfig c;
    c.algorithm = parse_algorithm(alg);
    c.n = n;
    const bool has_d = d_opt->count() > 0;
    const bool has_alpha = alpha_opt->count() > 0;
    switch (c.algorithm) {
      case Algorithm::kGbs:
      case Algorithm::kMst:
        if (!has_d) throw CliUsage(alg + " needs --d");
        if (has_alpha) throw CliUsage(alg + " takes --d, not --alpha");
        c.d = d;
        break;
      case Algorithm::kNt:
        if (!has_alpha) throw CliUsage("nt needs --alpha");
        if (has_d) throw CliUsage("nt takes --alpha, not --d");
        c.alpha = alpha;
        break;
      case Algorithm::kIndividual:
        if (has_d) c.d = d;
        if (has_alpha) c.alpha = alpha;
        break;
    }
    if (stages_opt->count() > 0) {
      if (c.algorithm != Algorithm::kMst) throw CliUsage("--stages applies to mst only");
      c.stages = stages;
    }
    if (verify && c.algorithm != Algorithm::kGbs) throw CliUsage("--verify applies to gbs only");
    c.verify = verify;
    return c;
  }
};

struct ReplicationFlags {
  int replicates = 1;
  std::string mode;

  void add(CLI::App* app, int default_r) {
    replicates = default_r;
    app->add_option("--replicates", replicates, "reads per group test")->capture_default_str();
    app->add_option("--mode", mode, "replication mode: none, negatives-only or all");
  }

  ReplicationPolicy policy() const {
    ReplicationPolicy p;
    p.r = replicates;
    if (mode.empty()) {
      p.mode = replicates == 1 ? ReplicationMode::kNone : ReplicationMode::kNegativesOnly;
    } else {
      p.mode = parse_replication_mode(mode);
    }
    if (p.mode == ReplicationMode::kNone && p.r != 1)
      throw CliUsage("--mode none requires --replicates 1");
    p.validate();
    return p;
  }
};

std::string num(double v) { return format_number(v); }

void write_file(const std::string& path, const std::string& content) {
  atomic_write(path, content);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
}

void warn_threshold(const PlannerConfig& c, std::ostream& err) {
  double ratio = -1.0;
  if (c.algorithm == Algorithm::kNt) {
    ratio = c.alpha;
  } else if (c.algorithm != Algorithm::kIndividual && c.n > 0) {
    ratio = static_cast<double>(c.d) / c.n;
  }
  if (ratio >= efficiency_threshold()) {
    err << "warning: infected fraction " << num(ratio) << " >= (3 - sqrt 5)/2 = "
        << num(efficiency_threshold()) << "; it is best to perform individual tests\n";
  }
}

void print_queries(const Session& s, std::ostream& out) {
  const auto pending = s.next();
  if (pending.empty()) return;
  out << "pool and test " << pending.size() << (pending.size() == 1 ? " group" : " groups") << ":\n";
  for (const auto& q : pending) {
    out << "  query " << q.id << " (replicate " << q.replicate_index << "): samples ";
    for (std::size_t i = 0; i < q.members.size(); ++i)
      out << (i ? "," : "") << s.config().label(q.members[i]);
    out << "\n";
  }
}

void print_status(const Session& s, std::ostream& out) {
  out << "session " << s.id() << ": " << to_string(s.status()) << ", "
      << s.run().physical_tests() << " tests so far\n";
  if (s.status() == SessionStatus::kAborted) out << "abort reason: " << s.abort_reason() << "\n";
  for (QueryId id : s.run().budget_limited())
    out << "query " << id << " is out of portions; accept its reads or abort\n";
  if (s.status() == SessionStatus::kComplete) {
    const auto join = [](const std::vector<std::string>& v) {
      std::string r;
      for (std::size_t i = 0; i < v.size(); ++i) r += (i ? "," : "") + v[i];
      return r.empty() ? std::string("(none)") : r;
    };
    out << "positive: " << join(s.positives()) << "\n";
    out << "negative: " << join(s.negatives()) << "\n";
  }
}

std::vector<GroupOutcome> parse_outcomes(const std::string& text) {
  std::vector<GroupOutcome> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto first = token.find_first_not_of(' ');
    const auto last = token.find_last_not_of(' ');
    const std::string t = first == std::string::npos ? "" : token.substr(first, last - first + 1);
    const auto colon = t.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 2 != t.size() ||
        (t.back() != '+' && t.back() != '-'))
      throw CliUsage("malformed outcome token '" + token + "' (expected QID:+ or QID:-)");
    const std::string id = t.substr(0, colon);
    if (id.find_first_not_of("0123456789") != std::string::npos || id.size() > 18)
      throw CliUsage("malformed outcome token '" + token + "' (query id must be a number)");
    out.push_back({std::stoll(id), t.back() == '+'});
  }
  if (out.empty()) throw CliUsage("--outcomes is empty");
  return out;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanCmd {
  PlannerFlags planner;
  ReplicationFlags replication;
  int budget = 0;
  CLI::Option* budget_opt = nullptr;
  std::string out_path;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("plan", "write a session config and initial planner state");
    planner.add(sub);
    replication.add(sub, 2);
    budget_opt = sub->add_option("--budget", budget, "portions available per sample");
    sub->add_option("--out", out_path, "plan file to write")->required();
  }

  int run(std::ostream& out, std::ostream& err) {
    SessionConfig cfg;
    cfg.planner = planner.config();
    cfg.replication = replication.policy();
    if (budget_opt->count() > 0) cfg.portion_budget_per_sample = budget;
    cfg.validate();
    warn_threshold(cfg.planner, err);

    const PlannerState state = planner_init(cfg.planner);
    const int per_sample = per_sample_query_requirement(cfg.planner);
    nlohmann::json summary = {{"queries_per_sample", per_sample},
                              {"portions_per_sample", per_sample * cfg.replication.max_reads()}};
    const auto& c = cfg.planner;
    out << "plan: " << to_string(c.algorithm) << " n=" << c.n;
    switch (c.algorithm) {
      case Algorithm::kGbs: {
        out << " d=" << c.d << "\n";
        const int wc = gbs_worst_case_tests(c.n, c.d);
        summary["worst_case_bound"] = wc;
        out << "worst case <= " << wc << " tests (ceil(log2 C(n,d)) + d)\n";
        out << "each sample is nominally in up to " << per_sample << " queries (floor(log2(n/d)) + 1)\n";
        break;
      }
      case Algorithm::kMst: {
        const int s = c.stages.value_or(mst_optimal_stages(c.n, c.d));
        out << " d=" << c.d << " stages=" << s << "\n";
        const int bound = static_cast<int>(std::ceil(mst_worst_case_bound(c.n, c.d) - 1e-9));
        const int exact = mst_worst_case_tests(c.n, c.d, c.stages);
        summary["stages"] = s;
        summary["worst_case_bound"] = bound;
        summary["worst_case_tests"] = exact;
        out << "worst case <= " << bound << " tests (e*d*ln(n/d)); stage recursion gives " << exact
            << ", never more than n = " << c.n << "\n";
        out << "each sample is in at most " << per_sample << " queries\n";
        break;
      }
      case Algorithm::kNt: {
        const double g = nt_average_tests(c.alpha, c.n, c.nt_table_cap);
        summary["expected_tests"] = g;
        out << " alpha=" << num(c.alpha) << "\n";
        out << "expected tests ~= " << num(g) << " (G(0," << c.n << "))\n";
        out << "each sample is in up to " << per_sample << " queries\n";
        break;
      }
      case Algorithm::kIndividual:
        out << "\n" << "tests = " << c.n << "\n";
        break;
    }
    out << "portions per sample: " << per_sample << " x " << cfg.replication.max_reads()
        << " reads = " << per_sample * cfg.replication.max_reads() << "\n";
    nlohmann::json doc = {{"version", 1},
                          {"config", cfg},
                          {"planner_state", state},
                          {"summary", summary}};
    write_file(out_path, doc.dump(2) + "\n");
    out << "wrote " << out_path << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// dilution
// ---------------------------------------------------------------------------

struct DilutionCmd {
  double vl = 0.0;
  double v50 = 0.0;
  double v95 = 0.0;
  double chi = 1.0;
  double gamma_star = 0.05;
  int replicates = 1;
  std::string tests = "log-rule";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("dilution", "maximum pool size and portion budget");
    sub->add_option("--viral-load", vl, "particles in one swab")->required();
    sub->add_option("--v50", v50, "load with 50% sensitivity (needed when gamma-star != 0.05)");
    sub->add_option("--v95", v95, "load with 95% sensitivity")->required();
    sub->add_option("--chi", chi, "extraction efficiency")->capture_default_str();
    sub->add_option("--gamma-star", gamma_star, "target false-negative rate")->capture_default_str();
    sub->add_option("--replicates", replicates, "reads per test")->capture_default_str();
    sub->add_option("--tests", tests, "tests per sample, or log-rule")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) {
    std::optional<int> t;
    if (tests != "log-rule") {
      try {
        std::size_t used = 0;
        t = std::stoi(tests, &used);
        if (used != tests.size()) throw std::invalid_argument(tests);
      } catch (const std::exception&) {
        throw CliUsage("--tests must be an integer or log-rule, got '" + tests + "'");
      }
    }
    if (replicates < 1) throw CliUsage("--replicates must be >= 1");
    if (!(vl > 0.0)) throw DomainError("viral load must be positive");
    TestKitProfile profile;
    profile.v50 = v50;
    profile.v95 = v95;
    profile.chi = chi;
    const auto rep = dilution_report(profile, vl, gamma_star, replicates, t);
    out << to_json(rep).dump(2) << "\n";
    if (!rep.portions.usable || rep.pool.raw < 2.0)
      err << "note: sample unusable for pooling (one portion cannot reach the required load "
          << "within a pool of two)\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateCmd {
  PlannerFlags planner;
  ReplicationFlags replication;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  bool exhaustive = false;
  bool noisy = false;
  std::string oracle;
  double v50 = 0.0, v95 = 0.0, beta = 0.0, chi = 1.0, gamma = 0.0;
  CLI::Option *v50_opt = nullptr, *v95_opt = nullptr, *beta_opt = nullptr, *gamma_opt = nullptr;
  int portions = 0;
  CLI::Option* portions_opt = nullptr;
  int true_d = 0;
  double true_alpha = 0.0;
  CLI::Option *true_d_opt = nullptr, *true_alpha_opt = nullptr;
  double vp = 1e4, vp_max = 0.0;
  CLI::Option* vp_max_opt = nullptr;
  int threads = 0;
  std::string csv_path, json_path;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("simulate", "Monte Carlo or exhaustive evaluation of a planner");
    planner.add(sub);
    replication.add(sub, 1);
    trials_opt = sub->add_option("--trials", trials, "Monte Carlo trials");
    seed_opt = sub->add_option("--seed", seed, "random seed (required for Monte Carlo)");
    sub->add_flag("--exhaustive", exhaustive, "enumerate every infection pattern (n <= 20)");
    sub->add_flag("--noisy", noisy, "dilution-aware noisy oracle");
    sub->add_option("--oracle", oracle, "ideal, noisy or fixed-rate")
        ->check(CLI::IsMember({"ideal", "noisy", "fixed-rate"}));
    v50_opt = sub->add_option("--v50", v50, "noisy: load with 50% sensitivity");
    v95_opt = sub->add_option("--v95", v95, "noisy: load with 95% sensitivity");
    sub->add_option("--chi", chi, "noisy: extraction efficiency");
    beta_opt = sub->add_option("--beta", beta, "false-positive rate");
    gamma_opt = sub->add_option("--gamma", gamma, "fixed-rate: false-negative rate");
    portions_opt = sub->add_option("--portions", portions, "noisy: portions per sample");
    true_d_opt = sub->add_option("--true-d", true_d, "infected per trial (default --d)");
    true_alpha_opt = sub->add_option("--true-alpha", true_alpha, "infection probability (default --alpha)");
    sub->add_option("--vp", vp, "particles in an infected sample")->capture_default_str();
    vp_max_opt = sub->add_option("--vp-max", vp_max, "draw loads log-uniformly in [vp, vp-max]");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    sub->add_option("--csv", csv_path, "write the test-count histogram as CSV");
    sub->add_option("--json", json_path, "write the report as JSON");
  }

  int run(std::ostream& out, std::ostream& err) {
    const PlannerConfig cfg = planner.config();
    warn_threshold(cfg, err);
    if (exhaustive) {
      if (trials_opt->count() || noisy || !oracle.empty())
        throw CliUsage("--exhaustive runs the ideal oracle and takes no --trials or oracle flags");
      const auto rep = exhaustive_sweep(cfg);
      std::string cert;
      for (std::size_t i = 0; i < rep.certificate.size(); ++i)
        cert += (i ? "," : "") + std::to_string(rep.certificate[i]);
      out << "max=" << rep.worst_case << " mean=" << num(rep.expected_tests)
          << " patterns=" << rep.patterns << " worst_pattern={" << cert << "}"
          << " all_correct=" << (rep.all_correct ? "yes" : "no") << " [" << rep.worst_case_label
          << "]\n";
      if (!json_path.empty()) write_file(json_path, to_json(rep).dump(2) + "\n");
      if (!csv_path.empty()) {
        write_file(csv_path, "patterns,expected_tests,worst_case\n" + std::to_string(rep.patterns) +
                                 "," + num(rep.expected_tests) + "," +
                                 std::to_string(rep.worst_case) + "\n");
      }
      return kExitOk;
    }
    if (!trials_opt->count()) throw CliUsage("simulate needs --trials (or --exhaustive)");
    if (trials < 1) throw CliUsage("--trials must be >= 1");
    if (!seed_opt->count()) throw CliUsage("simulate needs --seed");

    SimulationRequest rq;
    rq.planner = cfg;
    rq.replication = replication.policy();
    rq.trials = trials;
    rq.seed = seed;
    rq.threads = threads;

    if (cfg.algorithm == Algorithm::kNt ||
        (cfg.algorithm == Algorithm::kIndividual && planner.alpha_opt->count())) {
      rq.truth = TruthModel::bernoulli(true_alpha_opt->count() ? true_alpha : cfg.alpha);
      if (true_d_opt->count()) rq.truth = TruthModel::fixed(true_d);
    } else {
      rq.truth = TruthModel::fixed(true_d_opt->count() ? true_d : std::max(cfg.d, 0));
      if (true_alpha_opt->count()) rq.truth = TruthModel::bernoulli(true_alpha);
    }
    rq.truth.vp_min = vp;
    rq.truth.vp_max = vp_max_opt->count() ? vp_max : vp;

    std::string kind = oracle.empty() ? (noisy ? "noisy" : "ideal") : oracle;
    if (noisy && kind != "noisy") throw CliUsage("--noisy conflicts with --oracle " + kind);
    if (kind == "ideal") {
      if (v50_opt->count() || v95_opt->count() || beta_opt->count() || gamma_opt->count())
        throw CliUsage("oracle flags need --noisy or --oracle fixed-rate");
      rq.oracle = OutcomeOracle::ideal();
    } else if (kind == "fixed-rate") {
      rq.oracle = OutcomeOracle::fixed_rate(gamma, beta);
    } else {
      TestKitProfile profile = default_figure_profile();
      if (v50_opt->count()) profile.v50 = v50;
      if (v95_opt->count()) profile.v95 = v95;
      if (beta_opt->count()) profile.beta = beta;
      profile.chi = chi;
      rq.oracle = OutcomeOracle::noisy(profile);
      if (portions_opt->count()) rq.oracle.portions = portions;
    }
    const auto rep = simulate(rq);
    out << "max=" << rep.tests.max << " mean=" << num(rep.tests.mean) << " std=" << num(rep.tests.std)
        << " sensitivity=" << num(rep.sensitivity) << " fpr=" << num(rep.fpr)
        << " planner_failures=" << rep.planner_failures << " trials=" << rep.trials << " ["
        << rep.worst_case_label << "]\n";
    if (!json_path.empty()) {
      nlohmann::json j = to_json(rep);
      j["planner"] = rq.planner;
      j["truth"] = to_json(rq.truth);
      j["oracle"] = to_json(rq.oracle);
      j["replication"] = rq.replication;
      write_file(json_path, j.dump(2) + "\n");
    }
    if (!csv_path.empty()) write_file(csv_path, histogram_csv(rep));
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// figure
// ---------------------------------------------------------------------------

struct FigureCmd {
  std::string key;
  int n_min = 0, n_max = 0, d_max = 0;
  CLI::Option *n_min_opt = nullptr, *n_max_opt = nullptr, *d_max_opt = nullptr;
  std::vector<double> alphas;
  double vp = 0.0;
  CLI::Option* vp_opt = nullptr;
  std::string csv_path;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("figure", "tables behind the figures, as CSV");
    sub->add_option("key", key, "replication, portions, pool-dilution, gbs-wc, mst-stages, "
                                "mst-wc, gbs-vs-mst or nt-avg")
        ->required();
    n_min_opt = sub->add_option("--n-min", n_min);
    n_max_opt = sub->add_option("--n-max", n_max);
    d_max_opt = sub->add_option("--d-max", d_max);
    sub->add_option("--alphas", alphas, "nt-avg priors")->delimiter(',');
    vp_opt = sub->add_option("--vp", vp, "pool-dilution: particles per infected sample");
    sub->add_option("--csv", csv_path, "output path (default stdout)");
  }

  int run(std::ostream& out, std::ostream&) {
    FigureOptions o;
    if (n_min_opt->count()) o.n_min = n_min;
    if (n_max_opt->count()) o.n_max = n_max;
    if (d_max_opt->count()) o.d_max = d_max;
    if (vp_opt->count()) o.vp = vp;
    o.alphas = alphas;
    if (std::find(figure_keys().begin(), figure_keys().end(), key) == figure_keys().end())
      throw CliUsage("unknown figure key '" + key + "'");
    const std::string csv = figure_csv(key, o);
    if (csv_path.empty()) {
      out << csv;
    } else {
      write_file(csv_path, csv);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// session
// ---------------------------------------------------------------------------

struct SessionCmd {
  std::string action;
  std::string file;
  std::string plan;
  std::string outcomes;
  QueryId query = -1;
  std::string reason;
  CLI::Option *outcomes_opt = nullptr, *query_opt = nullptr;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("session", "file-driven session: start, next, report, status");
    sub->add_option("action", action, "start, next, report, status, accept or abort")
        ->required()
        ->check(CLI::IsMember({"start", "next", "report", "status", "accept", "abort"}));
    sub->add_option("--file", file, "session file")->required();
    sub->add_option("--plan", plan, "start: plan file (default: --file holds the plan)");
    outcomes_opt = sub->add_option("--outcomes", outcomes, "report: outcomes as QID:+,QID:-");
    query_opt = sub->add_option("--query", query, "accept: budget-limited query id");
    sub->add_option("--reason", reason, "abort: reason");
  }

  int run(std::ostream& out, std::ostream&) {
    if (action != "report" && outcomes_opt->count()) throw CliUsage("--outcomes belongs to report");
    if (action == "start") {
      const nlohmann::json doc = read_json(plan.empty() ? file : plan);
      if (!doc.contains("config")) throw LoadError("plan file has no config");
      SessionConfig cfg;
      try {
        cfg = doc.at("config").get<SessionConfig>();
      } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("plan file: ") + e.what());
      }
      const Session s = Session::create(cfg);
      s.save_file(file);
      out << "started session " << s.id() << "\n";
      print_queries(s, out);
      return kExitOk;
    }
    Session s = Session::load_file(file);
    if (action == "next") {
      print_queries(s, out);
      print_status(s, out);
      return kExitOk;
    }
    if (action == "status") {
      print_status(s, out);
      return kExitOk;
    }
    if (action == "report") {
      if (!outcomes_opt->count()) throw CliUsage("report needs --outcomes");
      const auto parsed = parse_outcomes(outcomes);
      s.report_outcomes(parsed);
    } else if (action == "accept") {
      if (!query_opt->count()) throw CliUsage("accept needs --query");
      s.accept_unreplicated(query);
    } else {
      s.abort(reason.empty() ? "aborted by operator" : reason);
    }
    s.save_file(file);
    print_queries(s, out);
    print_status(s, out);
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// nt-table
// ---------------------------------------------------------------------------

struct NtTableCmd {
  double alpha = 0.0;
  int n = 0;
  int cap = kDefaultNtTableCap;
  std::string out_path;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("nt-table", "nested-testing cost table G(m, n)");
    sub->add_option("--alpha", alpha, "prior infection probability")->required();
    sub->add_option("--n", n, "largest pool size")->required();
    sub->add_option("--cap", cap, "table size cap")->capture_default_str();
    sub->add_option("--out", out_path, "write the table as JSON (default stdout)");
  }

  int run(std::ostream& out, std::ostream&) {
    const NtCostTable table = nt_build_table(alpha, n, cap);
    const nlohmann::json j = table;
    if (out_path.empty()) {
      out << j.dump(2) << "\n";
    } else {
      write_file(out_path, j.dump(2) + "\n");
      out << "G(0," << n << ") = " << num(table.cost(0, n)) << "\n";
    }
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Adaptive pooled-testing planner", "gtplan");
  app.require_subcommand(1);
  PlanCmd plan;
  DilutionCmd dilution;
  SimulateCmd simulate_cmd;
  FigureCmd figure;
  SessionCmd session;
  NtTableCmd nt_table;
  plan.add(app);
  dilution.add(app);
  simulate_cmd.add(app);
  figure.add(app);
  session.add(app);
  nt_table.add(app);

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("gtplan");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "plan") return plan.run(out, err);
    if (name == "dilution") return dilution.run(out, err);
    if (name == "simulate") return simulate_cmd.run(out, err);
    if (name == "figure") return figure.run(out, err);
    if (name == "session") return session.run(out, err);
    return nt_table.run(out, err);
  } catch (const CliUsage& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace pooltest::cli
