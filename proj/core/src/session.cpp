#include "pooltest/session.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "pooltest/errors.hpp"

namespace pooltest {

namespace {

bool decide(const std::vector<bool>& reads) {
  std::unique_ptr<bool[]> buf(new bool[reads.size()]);
  for (std::size_t i = 0; i < reads.size(); ++i) buf[i] = reads[i];
  return majority_decide(std::span<const bool>(buf.get(), reads.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// ReplicatedRun
// ---------------------------------------------------------------------------

ReplicatedRun::ReplicatedRun(const PlannerConfig& planner, const ReplicationPolicy& policy,
                             std::optional<int> portion_budget)
    : planner_(planner_init(planner)), policy_(policy), budget_(portion_budget) {
  policy_.validate();
  if (budget_ && *budget_ < 1) throw ConfigurationError("portion budget must be >= 1");
  const auto samples = planner_.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) index_[samples[i]] = static_cast<int>(i);
  portions_.assign(samples.size(), 0);
  std::vector<GroupQuery> ignored;
  if (!planner_.terminal()) begin_batch(ignored);
}

std::vector<GroupQuery> ReplicatedRun::pending() const {
  std::vector<GroupQuery> out;
  for (const auto& q : issued_)
    if (!answered_.at(q.id)) out.push_back(q);
  return out;
}

std::vector<QueryId> ReplicatedRun::budget_limited() const {
  std::vector<QueryId> out;
  for (const auto& [id, l] : batch_)
    if (l.budget_limited && !l.decision) out.push_back(id);
  return out;
}

std::optional<QueryId> ReplicatedRun::logical_of(QueryId physical_id) const {
  auto it = physical_to_logical_.find(physical_id);
  if (it == physical_to_logical_.end()) return std::nullopt;
  return it->second;
}

const ReplicatedRun::Logical* ReplicatedRun::logical(QueryId logical_id) const {
  auto it = batch_.find(logical_id);
  if (it != batch_.end()) return &it->second;
  for (const auto& l : decided_)
    if (l.query.id == logical_id) return &l;
  return nullptr;
}

void ReplicatedRun::begin_batch(std::vector<GroupQuery>& issued_now) {
  batch_.clear();
  for (const auto& q : planner_.pending()) {
    Logical l;
    l.query = q;
    batch_.emplace(q.id, std::move(l));
  }
  const int first_reads = policy_.mode == ReplicationMode::kAll ? policy_.r : 1;
  for (const auto& q : planner_.pending()) issue_reads(batch_.at(q.id), first_reads, issued_now);
}

void ReplicatedRun::issue_reads(Logical& l, int count, std::vector<GroupQuery>& issued_now) {
  for (int k = 0; k < count; ++k) {
    if (budget_) {
      for (SampleId m : l.query.members) {
        if (portions_[index_.at(m)] + 1 > *budget_) {
          l.budget_limited = true;
          return;
        }
      }
    }
    GroupQuery read;
    read.id = next_physical_++;
    read.members = l.query.members;
    read.replicate_index = static_cast<int>(l.reads.size()) + l.outstanding + 1;
    for (SampleId m : read.members) ++portions_[index_.at(m)];
    ++l.outstanding;
    physical_to_logical_[read.id] = l.query.id;
    answered_[read.id] = false;
    issued_.push_back(read);
    issued_now.push_back(std::move(read));
  }
}

void ReplicatedRun::after_read(Logical& l, std::vector<GroupQuery>& issued_now) {
  if (l.decision) return;
  const int have = static_cast<int>(l.reads.size());
  switch (policy_.mode) {
    case ReplicationMode::kNone:
      l.decision = l.reads.front();
      return;
    case ReplicationMode::kAll:
      if (have == policy_.r) l.decision = decide(l.reads);
      return;
    case ReplicationMode::kNegativesOnly:
      if (have == 1) {
        if (l.reads.front() || policy_.r == 1) {
          l.decision = l.reads.front();
        } else {
          issue_reads(l, policy_.r - 1, issued_now);
        }
      } else if (have == policy_.r) {
        l.decision = decide(l.reads);
      }
      return;
  }
}

void ReplicatedRun::advance_if_decided(std::vector<GroupQuery>& issued_now) {
  if (batch_.empty()) return;
  for (const auto& [id, l] : batch_)
    if (!l.decision) return;
  std::vector<GroupOutcome> outcomes;
  for (const auto& q : planner_.pending()) {
    auto& l = batch_.at(q.id);
    outcomes.push_back({q.id, *l.decision});
    decided_.push_back(std::move(l));
  }
  batch_.clear();
  planner_ = planner_observe(std::move(planner_), outcomes);
  if (!planner_.terminal()) begin_batch(issued_now);
}

std::vector<GroupQuery> ReplicatedRun::report(std::span<const GroupOutcome> outcomes) {
  std::set<QueryId> seen;
  for (const auto& o : outcomes) {
    auto it = answered_.find(o.id);
    if (it == answered_.end()) throw ProtocolError("unknown query id " + std::to_string(o.id));
    if (it->second) throw ProtocolError("query " + std::to_string(o.id) + " was already answered");
    if (!seen.insert(o.id).second)
      throw ProtocolError("duplicate outcome for query " + std::to_string(o.id));
  }
  std::vector<GroupQuery> issued_now;
  for (const auto& o : outcomes) {
    answered_[o.id] = true;
    auto& l = batch_.at(physical_to_logical_.at(o.id));
    l.reads.push_back(o.positive);
    --l.outstanding;
    after_read(l, issued_now);
    advance_if_decided(issued_now);
  }
  return issued_now;
}

std::vector<GroupQuery> ReplicatedRun::accept_unreplicated(QueryId logical_id) {
  auto it = batch_.find(logical_id);
  if (it == batch_.end() || !it->second.budget_limited || it->second.decision)
    throw ProtocolError("query " + std::to_string(logical_id) + " is not waiting on the budget");
  auto& l = it->second;
  if (l.outstanding > 0)
    throw ProtocolError("query " + std::to_string(logical_id) + " still has reads outstanding");
  if (l.reads.empty())
    throw ProtocolError("query " + std::to_string(logical_id) +
                        " has no reads to accept; the session must be aborted");
  l.decision = decide(l.reads);
  std::vector<GroupQuery> issued_now;
  advance_if_decided(issued_now);
  return issued_now;
}

// ---------------------------------------------------------------------------
// SessionConfig
// ---------------------------------------------------------------------------

void SessionConfig::validate() const {
  planner.validate();
  replication.validate();
  if (profile) profile->validate();
  if (portion_budget_per_sample && *portion_budget_per_sample < 1)
    throw ConfigurationError("portion_budget_per_sample must be >= 1");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != planner.n)
      throw ConfigurationError("labels must name exactly n samples");
    if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
      throw ConfigurationError("labels must be unique");
  }
}

std::string SessionConfig::label(SampleId id) const {
  if (!labels.empty() && id >= 0 && id < static_cast<SampleId>(labels.size())) return labels[id];
  return std::to_string(id);
}

void to_json(nlohmann::json& j, const SessionConfig& c) {
  j = {{"planner", c.planner}, {"replication", c.replication}};
  if (c.profile) j["profile"] = *c.profile;
  if (c.portion_budget_per_sample) j["portion_budget_per_sample"] = *c.portion_budget_per_sample;
  if (!c.labels.empty()) j["labels"] = c.labels;
}

void from_json(const nlohmann::json& j, SessionConfig& c) {
  c.planner = j.at("planner").get<PlannerConfig>();
  c.replication = j.contains("replication") ? j.at("replication").get<ReplicationPolicy>()
                                            : ReplicationPolicy{};
  c.profile.reset();
  if (j.contains("profile") && !j.at("profile").is_null())
    c.profile = j.at("profile").get<TestKitProfile>();
  c.portion_budget_per_sample.reset();
  if (j.contains("portion_budget_per_sample") && !j.at("portion_budget_per_sample").is_null())
    c.portion_budget_per_sample = j.at("portion_budget_per_sample").get<int>();
  c.labels = j.value("labels", std::vector<std::string>{});
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kActive: return "active";
    case SessionStatus::kComplete: return "complete";
    case SessionStatus::kAborted: return "aborted";
  }
  return "active";
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

std::string new_session_id() {
  std::random_device rd;
  std::string out;
  char buf[9];
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Session::Session(SessionConfig config, std::string id, Clock clock)
    : config_(std::move(config)),
      id_(std::move(id)),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp)),
      run_(config_.planner, config_.replication, config_.portion_budget_per_sample) {}

Session Session::create(const SessionConfig& config, std::string session_id, Clock clock) {
  config.validate();
  if (config.portion_budget_per_sample &&
      (config.planner.algorithm == Algorithm::kGbs || config.planner.algorithm == Algorithm::kMst)) {
    const int per_sample = per_sample_query_requirement(config.planner);
    const int needed = per_sample * config.replication.max_reads();
    if (needed > *config.portion_budget_per_sample) {
      throw ConfigurationError(
          "sample " + config.label(0) + " may need up to " + std::to_string(needed) +
          " portions (" + std::to_string(per_sample) + " queries x " +
          std::to_string(config.replication.max_reads()) + " reads) but the budget is " +
          std::to_string(*config.portion_budget_per_sample));
    }
  }
  Session s(config, session_id.empty() ? new_session_id() : std::move(session_id), std::move(clock));
  if (!s.run_.budget_limited().empty()) {
    const auto* l = s.run_.logical(s.run_.budget_limited().front());
    throw ConfigurationError("sample " + config.label(l->query.members.front()) +
                             " cannot supply a portion for the first queries within the budget");
  }
  s.log_issued(std::vector<GroupQuery>(s.run_.issued().begin(), s.run_.issued().end()));
  return s;
}

SessionStatus Session::status() const {
  if (aborted_) return SessionStatus::kAborted;
  return run_.terminal() ? SessionStatus::kComplete : SessionStatus::kActive;
}

void Session::require_active() const {
  if (status() != SessionStatus::kActive)
    throw ProtocolError("session " + id_ + " is " + std::string(to_string(status())));
}

std::vector<GroupQuery> Session::next() const {
  if (status() != SessionStatus::kActive) return {};
  return run_.pending();
}

void Session::log(const std::string& kind, nlohmann::json payload, std::string at) {
  SessionEvent e;
  e.seq = static_cast<std::int64_t>(events_.size());
  e.kind = kind;
  e.payload = std::move(payload);
  e.at = at.empty() ? clock_() : std::move(at);
  events_.push_back(std::move(e));
}

void Session::log_issued(const std::vector<GroupQuery>& issued) {
  for (const auto& q : issued) {
    nlohmann::json query = q;
    query["logical"] = *run_.logical_of(q.id);
    log("issue", {{"query", std::move(query)}});
  }
}

void Session::report_outcomes(std::span<const GroupOutcome> outcomes) {
  require_active();
  // Validate the whole batch first so a protocol error leaves the session untouched.
  {
    ReplicatedRun probe = run_;
    probe.report(outcomes);
  }
  for (const auto& o : outcomes) {
    log("outcome", {{"outcome", {{"id", o.id}, {"result", o.positive ? "+" : "-"}}}});
    const auto issued = run_.report(std::span<const GroupOutcome>(&o, 1));
    log_issued(issued);
  }
}

void Session::accept_unreplicated(QueryId logical_id) {
  require_active();
  const auto issued = run_.accept_unreplicated(logical_id);
  log("accept", {{"query", logical_id}});
  log_issued(issued);
}

void Session::abort(const std::string& reason) {
  require_active();
  aborted_ = true;
  abort_reason_ = reason;
  log("abort", {{"reason", reason}});
}

std::vector<std::string> Session::positives() const {
  std::vector<std::string> out;
  for (SampleId id : run_.planner().diagnosed_positive()) out.push_back(config_.label(id));
  return out;
}

std::vector<std::string> Session::negatives() const {
  std::vector<std::string> out;
  for (SampleId id : run_.planner().diagnosed_negative()) out.push_back(config_.label(id));
  return out;
}

nlohmann::json Session::snapshot() const {
  nlohmann::json j = {{"status", std::string(to_string(status()))},
                      {"diagnoses", {{"positive", positives()}, {"negative", negatives()}}},
                      {"portions_used", std::vector<int>(run_.portions_used().begin(),
                                                         run_.portions_used().end())}};
  if (aborted_) j["abort_reason"] = abort_reason_;
  return j;
}

nlohmann::json Session::save() const {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : events_) {
    nlohmann::json ev = {{"seq", e.seq}, {"kind", e.kind}, {"at", e.at}};
    ev.update(e.payload);
    events.push_back(std::move(ev));
  }
  return {{"version", kSessionFileVersion},
          {"session_id", id_},
          {"config", config_},
          {"events", std::move(events)},
          {"snapshot", snapshot()}};
}

Session Session::load(const nlohmann::json& doc, Clock clock) {
  SessionConfig config;
  std::string id;
  try {
    if (!doc.contains("version") || doc.at("version").get<int>() != kSessionFileVersion)
      throw LoadError("session file: unsupported version " +
                      (doc.contains("version") ? doc.at("version").dump() : std::string("(none)")));
    config = doc.at("config").get<SessionConfig>();
    config.validate();
    id = doc.at("session_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("session file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw LoadError(std::string("session file: invalid config: ") + e.what());
  }

  Session s(config, id, std::move(clock));
  std::size_t matched = 0;
  const auto& events = doc.at("events");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const auto fail = [&](const std::string& why) {
      return LoadError("session file: replay diverged at event " + std::to_string(i) + ": " + why);
    };
    try {
      if (ev.at("seq").get<std::int64_t>() != static_cast<std::int64_t>(i))
        throw fail("sequence number out of order");
      const auto kind = ev.at("kind").get<std::string>();
      if (kind == "issue") {
        const auto& logged = ev.at("query");
        if (matched >= s.run_.issued().size()) throw fail("query was never issued on replay");
        const GroupQuery& expect = s.run_.issued()[matched];
        if (logged.get<GroupQuery>() != expect ||
            logged.at("logical").get<QueryId>() != *s.run_.logical_of(expect.id))
          throw fail("issued query differs from the logged one");
        ++matched;
      } else {
        if (matched != s.run_.issued().size()) throw fail("missing issue events");
        if (kind == "outcome") {
          const auto& o = ev.at("outcome");
          const auto result = o.at("result").get<std::string>();
          if (result != "+" && result != "-") throw fail("outcome result must be + or -");
          const GroupOutcome outcome{o.at("id").get<QueryId>(), result == "+"};
          s.require_active();
          s.run_.report(std::span<const GroupOutcome>(&outcome, 1));
        } else if (kind == "accept") {
          s.require_active();
          s.run_.accept_unreplicated(ev.at("query").get<QueryId>());
        } else if (kind == "abort") {
          s.require_active();
          s.aborted_ = true;
          s.abort_reason_ = ev.at("reason").get<std::string>();
        } else {
          throw fail("unknown event kind '" + kind + "'");
        }
      }
      nlohmann::json payload = ev;
      payload.erase("seq");
      payload.erase("kind");
      payload.erase("at");
      s.log(ev.at("kind").get<std::string>(), std::move(payload), ev.at("at").get<std::string>());
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  if (matched != s.run_.issued().size())
    throw LoadError("session file: replay diverged at event " + std::to_string(events.size()) +
                    ": missing issue events");
  if (doc.contains("snapshot") && doc.at("snapshot") != s.snapshot())
    throw LoadError("session file: replay diverged: stored snapshot differs from replayed state");
  return s;
}

void Session::save_file(const std::filesystem::path& path) const {
  atomic_write(path, save().dump(2) + "\n");
}

Session Session::load_file(const std::filesystem::path& path, Clock clock) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open session file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("session file " + path.string() + ": " + e.what());
  }
  return load(doc, std::move(clock));
}

}  // namespace pooltest
