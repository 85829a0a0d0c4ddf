#pragma once

// Live execution of a plan: the planner wrapped with a replication policy, per-sample
// portion accounting and an append-only event log that replays to the current state.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pooltest/planners.hpp"
#include "pooltest/test_model.hpp"

namespace pooltest {

// Executes a planner where every logical query may be read several times.
//
// mode none: one read decides. mode all: r reads are issued together, majority decides.
// mode negatives-only: one read; a positive read decides at once, a negative read
// triggers r-1 confirmation reads and the majority of all r decides (ties positive).
// A read that would push any member above the portion budget is not issued; the
// logical query is flagged budget-limited until the operator accepts the reads it has
// or aborts.
class ReplicatedRun {
 public:
  struct Logical {
    GroupQuery query;
    std::vector<bool> reads;
    int outstanding = 0;
    bool budget_limited = false;
    std::optional<bool> decision;
  };

  ReplicatedRun(const PlannerConfig& planner, const ReplicationPolicy& policy,
                std::optional<int> portion_budget);

  bool terminal() const { return planner_.terminal(); }
  const PlannerState& planner() const { return planner_; }
  const ReplicationPolicy& policy() const { return policy_; }
  std::optional<int> portion_budget() const { return budget_; }

  // Issued, unanswered physical reads in issue order. replicate_index is 1-based.
  std::vector<GroupQuery> pending() const;
  // Logical ids of queries waiting for an operator decision because of the budget.
  std::vector<QueryId> budget_limited() const;
  // Logical query that physical read `physical_id` belongs to.
  std::optional<QueryId> logical_of(QueryId physical_id) const;
  const Logical* logical(QueryId logical_id) const;

  // Applies physical read results in order. Unknown or already answered ids and
  // duplicates raise ProtocolError before anything changes. Returns reads issued as a
  // consequence (confirmations and the planner's next queries).
  std::vector<GroupQuery> report(std::span<const GroupOutcome> outcomes);

  // Decides a budget-limited query from the reads it already has.
  std::vector<GroupQuery> accept_unreplicated(QueryId logical_id);

  // Every physical read issued so far, in order.
  std::span<const GroupQuery> issued() const { return issued_; }
  std::span<const int> portions_used() const { return portions_; }
  std::int64_t physical_tests() const { return static_cast<std::int64_t>(issued_.size()); }
  std::int64_t logical_tests() const { return planner_.queries_issued(); }
  // Decided logical queries (query, reads, decision) in decision order.
  std::span<const Logical> decided() const { return decided_; }

 private:
  void begin_batch(std::vector<GroupQuery>& issued_now);
  void issue_reads(Logical& l, int count, std::vector<GroupQuery>& issued_now);
  void after_read(Logical& l, std::vector<GroupQuery>& issued_now);
  void advance_if_decided(std::vector<GroupQuery>& issued_now);

  PlannerState planner_;
  ReplicationPolicy policy_;
  std::optional<int> budget_;
  std::map<SampleId, int> index_;
  std::vector<int> portions_;
  std::map<QueryId, Logical> batch_;  // current planner batch, by logical id
  std::map<QueryId, QueryId> physical_to_logical_;
  std::map<QueryId, bool> answered_;
  std::vector<GroupQuery> issued_;
  std::vector<Logical> decided_;
  QueryId next_physical_ = 0;
};

struct SessionConfig {
  PlannerConfig planner;
  std::optional<TestKitProfile> profile;
  ReplicationPolicy replication;
  std::optional<int> portion_budget_per_sample;  // empty = unlimited
  std::vector<std::string> labels;              // empty = sample ids are labels

  void validate() const;
  std::string label(SampleId id) const;
};

void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

enum class SessionStatus { kActive, kComplete, kAborted };
std::string_view to_string(SessionStatus s);

struct SessionEvent {
  std::int64_t seq = 0;
  std::string kind;  // "issue", "outcome", "accept", "abort"
  nlohmann::json payload;
  std::string at;    // UTC ISO-8601
};

inline constexpr int kSessionFileVersion = 1;

class Session {
 public:
  using Clock = std::function<std::string()>;

  // Throws ConfigurationError for invalid configs, or when the budget cannot cover the
  // planner's per-sample requirement (GBS, MST) or its first queries.
  static Session create(const SessionConfig& config, std::string session_id = {},
                        Clock clock = {});

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  SessionStatus status() const;
  const std::string& abort_reason() const { return abort_reason_; }
  const ReplicatedRun& run() const { return run_; }
  std::span<const SessionEvent> events() const { return events_; }

  // Physical reads to perform now. Empty unless active.
  std::vector<GroupQuery> next() const;
  void report_outcomes(std::span<const GroupOutcome> outcomes);
  void accept_unreplicated(QueryId logical_id);
  void abort(const std::string& reason);

  std::vector<std::string> positives() const;
  std::vector<std::string> negatives() const;

  // {"status", "diagnoses": {"positive", "negative"}, "portions_used"}
  nlohmann::json snapshot() const;
  // {"version", "session_id", "config", "events", "snapshot"}
  nlohmann::json save() const;
  // Replays the event log; any divergence raises LoadError naming the first bad event.
  static Session load(const nlohmann::json& doc, Clock clock = {});

  void save_file(const std::filesystem::path& path) const;
  static Session load_file(const std::filesystem::path& path, Clock clock = {});

 private:
  Session(SessionConfig config, std::string id, Clock clock);
  void log(const std::string& kind, nlohmann::json payload, std::string at = {});
  void log_issued(const std::vector<GroupQuery>& issued);
  void require_active() const;

  SessionConfig config_;
  std::string id_;
  Clock clock_;
  ReplicatedRun run_;
  std::vector<SessionEvent> events_;
  bool aborted_ = false;
  std::string abort_reason_;
};

// 128-bit random session id, hex encoded.
std::string new_session_id();
std::string utc_timestamp();

// Writes `content` to `path` via a temporary file and rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace pooltest
