#include <string>
#include <unordered_map>

#include "pooltest/errors.hpp"
#include "pooltest/planners.hpp"

namespace pooltest {

void to_json(nlohmann::json& j, const PlannerConfig& c) {
  j = {{"algorithm", std::string(to_string(c.algorithm))}, {"n", c.n}};
  if (c.algorithm == Algorithm::kGbs || c.algorithm == Algorithm::kMst) j["d"] = c.d;
  if (c.algorithm == Algorithm::kNt) {
    j["alpha"] = c.alpha;
    if (c.nt_table_cap != kDefaultNtTableCap) j["nt_table_cap"] = c.nt_table_cap;
  }
  if (c.stages) j["stages"] = *c.stages;
  if (c.algorithm == Algorithm::kGbs) j["verify"] = c.verify;
}

void from_json(const nlohmann::json& j, PlannerConfig& c) {
  c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  c.n = j.at("n").get<int>();
  c.d = j.value("d", 0);
  c.alpha = j.value("alpha", 0.0);
  if (j.contains("stages") && !j.at("stages").is_null()) {
    c.stages = j.at("stages").get<int>();
  } else {
    c.stages.reset();
  }
  c.verify = j.value("verify", false);
  c.nt_table_cap = j.value("nt_table_cap", kDefaultNtTableCap);
}

namespace {

const char* phase_name(detail::GbsState::Phase p) {
  using Phase = detail::GbsState::Phase;
  switch (p) {
    case Phase::kGroup: return "group";
    case Phase::kBsp: return "bsp";
    case Phase::kIndividual: return "individual";
    case Phase::kVerify: return "verify";
    case Phase::kDone: return "done";
  }
  return "done";
}

detail::GbsState::Phase parse_phase(const std::string& s) {
  using Phase = detail::GbsState::Phase;
  if (s == "group") return Phase::kGroup;
  if (s == "bsp") return Phase::kBsp;
  if (s == "individual") return Phase::kIndividual;
  if (s == "verify") return Phase::kVerify;
  if (s == "done") return Phase::kDone;
  throw LoadError("planner state: unknown GBS phase '" + s + "'");
}

std::vector<int> indices(const nlohmann::json& j, const char* key, int n) {
  auto v = j.at(key).get<std::vector<int>>();
  for (int i : v)
    if (i < 0 || i >= n) throw LoadError(std::string("planner state: index out of range in ") + key);
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const GroupQuery& q) {
  j = {{"id", q.id}, {"members", q.members}, {"replicate", q.replicate_index}};
}

void from_json(const nlohmann::json& j, GroupQuery& q) {
  q.id = j.at("id").get<QueryId>();
  q.members = j.at("members").get<std::vector<SampleId>>();
  q.replicate_index = j.value("replicate", 1);
}

void to_json(nlohmann::json& j, const PlannerState& s) {
  nlohmann::json bins = {{"undiagnosed", s.undiagnosed()},
                         {"positive", s.diagnosed_positive()},
                         {"negative", s.diagnosed_negative()}};
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& q : s.pending_) pending.push_back(q);

  nlohmann::json alg = {{"config", s.config_},
                        {"samples", s.samples_},
                        {"next_query_id", s.next_query_id_},
                        {"underestimates", s.underestimates_},
                        {"max_round", s.max_round_},
                        {"queries_per_sample", s.per_sample_}};
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, detail::GbsState>) {
          alg["phase"] = phase_name(a.phase);
          alg["d"] = a.d;
          alg["pool"] = a.pool;
          alg["active"] = a.active;
          alg["tested"] = a.tested;
          alg["round_counts"] = a.round_counts;
        } else if constexpr (std::is_same_v<T, detail::MstState>) {
          alg["d"] = a.d;
          alg["s"] = a.s;
          alg["stage"] = a.stage;
          alg["delta"] = a.delta;
          alg["qsb"] = a.qsb;
          alg["groups"] = a.groups;
        } else if constexpr (std::is_same_v<T, detail::NtState>) {
          alg["alpha"] = a.alpha;
          alg["ub"] = a.ub;
          alg["pib"] = a.pib;
          alg["tested"] = a.tested;
        }
      },
      s.alg_);

  j = {{"version", kPlannerStateVersion},
       {"algorithm", std::string(to_string(s.config_.algorithm))},
       {"bins", std::move(bins)},
       {"pending", std::move(pending)},
       {"alg_state", std::move(alg)}};
}

void from_json(const nlohmann::json& j, PlannerState& s) {
  try {
    if (j.at("version").get<int>() != kPlannerStateVersion)
      throw LoadError("planner state: unsupported version " + j.at("version").dump());
    const auto& alg = j.at("alg_state");
    PlannerState out;
    out.config_ = alg.at("config").get<PlannerConfig>();
    out.config_.validate();
    if (parse_algorithm(j.at("algorithm").get<std::string>()) != out.config_.algorithm)
      throw LoadError("planner state: algorithm does not match config");
    out.samples_ = alg.at("samples").get<std::vector<SampleId>>();
    if (static_cast<int>(out.samples_.size()) != out.config_.n)
      throw LoadError("planner state: sample list does not match n");
    out.next_query_id_ = alg.at("next_query_id").get<QueryId>();
    out.underestimates_ = alg.value("underestimates", 0);
    out.max_round_ = alg.value("max_round", 0);
    out.per_sample_ = alg.at("queries_per_sample").get<std::vector<int>>();
    if (out.per_sample_.size() != out.samples_.size())
      throw LoadError("planner state: queries_per_sample does not match n");
    out.status_.assign(out.samples_.size(), Diagnosis::kUndiagnosed);

    std::unordered_map<SampleId, std::size_t> index;
    for (std::size_t i = 0; i < out.samples_.size(); ++i) index[out.samples_[i]] = i;
    const auto& bins = j.at("bins");
    for (auto [key, value] : {std::pair{"positive", Diagnosis::kPositive},
                              std::pair{"negative", Diagnosis::kNegative}}) {
      for (SampleId id : bins.at(key).get<std::vector<SampleId>>()) {
        auto it = index.find(id);
        if (it == index.end()) throw LoadError(std::string("planner state: unknown sample in ") + key);
        if (out.status_[it->second] != Diagnosis::kUndiagnosed)
          throw LoadError("planner state: sample " + std::to_string(id) + " is in two bins");
        out.status_[it->second] = value;
      }
    }
    for (const auto& q : j.at("pending")) out.pending_.push_back(q.get<GroupQuery>());

    switch (out.config_.algorithm) {
      case Algorithm::kGbs: {
        detail::GbsState g;
        g.phase = parse_phase(alg.at("phase").get<std::string>());
        g.d = alg.at("d").get<int>();
        g.pool = indices(alg, "pool", out.config_.n);
        g.active = indices(alg, "active", out.config_.n);
        g.tested = indices(alg, "tested", out.config_.n);
        g.round_counts = alg.at("round_counts").get<std::vector<int>>();
        if (static_cast<int>(g.round_counts.size()) != out.config_.n)
          throw LoadError("planner state: round_counts does not match n");
        out.alg_ = std::move(g);
        break;
      }
      case Algorithm::kMst: {
        detail::MstState m;
        m.d = alg.at("d").get<int>();
        m.s = alg.at("s").get<int>();
        m.stage = alg.at("stage").get<int>();
        m.delta = alg.at("delta").get<double>();
        m.qsb = indices(alg, "qsb", out.config_.n);
        m.groups = alg.at("groups").get<std::vector<std::vector<int>>>();
        for (const auto& group : m.groups)
          for (int i : group)
            if (i < 0 || i >= out.config_.n) throw LoadError("planner state: index out of range in groups");
        out.alg_ = std::move(m);
        break;
      }
      case Algorithm::kNt: {
        detail::NtState t;
        t.alpha = alg.at("alpha").get<double>();
        t.table = shared_nt_table(t.alpha, out.config_.n, out.config_.nt_table_cap);
        t.ub = indices(alg, "ub", out.config_.n);
        t.pib = indices(alg, "pib", out.config_.n);
        t.tested = indices(alg, "tested", out.config_.n);
        out.alg_ = std::move(t);
        break;
      }
      case Algorithm::kIndividual:
        out.alg_ = detail::IndividualState{};
        break;
    }
    if (auto problem = out.check_invariants(); !problem.empty())
      throw LoadError("planner state: " + problem);
    s = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("planner state: ") + e.what());
  } catch (const ConfigurationError& e) {
    throw LoadError(std::string("planner state: ") + e.what());
  }
}

}  // namespace pooltest
