#include "pooltest/service.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "pooltest/dilution.hpp"
#include "pooltest/errors.hpp"
#include "pooltest/nt_table.hpp"

namespace pooltest {

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump();
  r.headers["Content-Type"] = "application/json";
  return r;
}

HttpResponse error(int status, const std::string& message,
                   const std::map<std::string, std::string>& fields = {}) {
  nlohmann::json body = {{"error", message}};
  if (!fields.empty()) body["fields"] = fields;
  return json_response(status, body);
}

HttpResponse session_response(int status, const Session& s) {
  HttpResponse r = json_response(status, Api::view(s));
  r.headers["ETag"] = Api::etag(s);
  return r;
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

// Strict numeric parsing for query parameters; accepts 1e6.
std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) return std::nullopt;
  return v;
}

const std::string* param(const HttpRequest& rq, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    auto it = rq.query.find(n);
    if (it != rq.query.end()) return &it->second;
  }
  return nullptr;
}

void check_number(const nlohmann::json& obj, const char* key, const std::string& field,
                  std::map<std::string, std::string>& out, bool integer) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (integer ? !v.is_number_integer() : !v.is_number()) {
    out[field] = integer ? "must be an integer" : "must be a number";
  }
}

}  // namespace

std::optional<std::string> HttpRequest::header(const std::string& lower_name) const {
  auto it = headers.find(lower_name);
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::string> session_config_problems(const nlohmann::json& doc) {
  std::map<std::string, std::string> out;
  if (!doc.is_object()) {
    out["config"] = "must be a JSON object";
    return out;
  }
  if (!doc.contains("planner") || !doc.at("planner").is_object()) {
    out["planner"] = "required object";
    return out;
  }
  const auto& p = doc.at("planner");
  std::optional<Algorithm> alg;
  if (!p.contains("algorithm") || !p.at("algorithm").is_string()) {
    out["planner.algorithm"] = "required: one of gbs, mst, nt, individual";
  } else {
    try {
      alg = parse_algorithm(p.at("algorithm").get<std::string>());
    } catch (const std::exception& e) {
      out["planner.algorithm"] = e.what();
    }
  }
  check_number(p, "n", "planner.n", out, true);
  check_number(p, "d", "planner.d", out, true);
  check_number(p, "alpha", "planner.alpha", out, false);
  check_number(p, "stages", "planner.stages", out, true);
  if (!p.contains("n")) out["planner.n"] = "required";
  if (out.empty() && alg) {
    const long long n = p.at("n").get<long long>();
    if (n < 1) out["planner.n"] = "must be >= 1";
    if (*alg == Algorithm::kNt) {
      if (!p.contains("alpha")) {
        out["planner.alpha"] = "required for nt";
      } else {
        const double a = p.at("alpha").get<double>();
        if (!(a > 0.0 && a < 1.0)) out["planner.alpha"] = "must lie in (0, 1)";
      }
    } else if (*alg != Algorithm::kIndividual) {
      if (!p.contains("d")) {
        out["planner.d"] = "required for gbs and mst";
      } else {
        const long long d = p.at("d").get<long long>();
        const long long lo = *alg == Algorithm::kMst ? 1 : 0;
        if (d < lo || d >= n) out["planner.d"] = "must lie in [" + std::to_string(lo) + ", n)";
      }
    }
    if (p.contains("stages") && p.at("stages").get<long long>() < 1)
      out["planner.stages"] = "must be >= 1";
  }
  if (doc.contains("replication")) {
    const auto& r = doc.at("replication");
    if (!r.is_object()) {
      out["replication"] = "must be an object";
    } else {
      check_number(r, "r", "replication.r", out, true);
      if (r.contains("mode")) {
        try {
          parse_replication_mode(r.at("mode").get<std::string>());
        } catch (const std::exception&) {
          out["replication.mode"] = "must be none, negatives-only or all";
        }
      }
    }
  }
  if (doc.contains("profile") && !doc.at("profile").is_null()) {
    const auto& pr = doc.at("profile");
    if (!pr.is_object()) {
      out["profile"] = "must be an object";
    } else {
      for (const char* k : {"v50", "v95", "beta", "chi"})
        check_number(pr, k, std::string("profile.") + k, out, false);
    }
  }
  if (doc.contains("portion_budget_per_sample") && !doc.at("portion_budget_per_sample").is_null()) {
    const auto& b = doc.at("portion_budget_per_sample");
    if (!b.is_number_integer() || b.get<long long>() < 1)
      out["portion_budget_per_sample"] = "must be an integer >= 1";
  }
  if (doc.contains("labels") && !doc.at("labels").is_array()) out["labels"] = "must be an array";
  if (!out.empty()) return out;

  // Whatever remains is caught by the module's own validation.
  try {
    const auto config = doc.get<SessionConfig>();
    try {
      config.replication.validate();
    } catch (const std::exception& e) {
      out["replication"] = e.what();
    }
    if (config.profile) {
      try {
        config.profile->validate();
      } catch (const std::exception& e) {
        out["profile"] = e.what();
      }
    }
    if (out.empty()) config.validate();
  } catch (const std::exception& e) {
    if (out.empty()) out["config"] = e.what();
  }
  return out;
}

Api::Api(std::filesystem::path data_dir, Session::Clock clock)
    : data_dir_(std::move(data_dir)), clock_(std::move(clock)) {
  if (!data_dir_.empty()) std::filesystem::create_directories(data_dir_);
}

std::string Api::etag(const Session& s) {
  // FNV-1a over the session id and the event-log length.
  const std::string key = s.id() + ":" + std::to_string(s.events().size());
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "\"%016llx\"", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json Api::view(const Session& s) {
  const auto& cfg = s.config();
  const auto& run = s.run();
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& q : s.next()) {
    nlohmann::json labels = nlohmann::json::array();
    for (SampleId m : q.members) labels.push_back(cfg.label(m));
    pending.push_back({{"query_id", q.id},
                       {"logical_id", *run.logical_of(q.id)},
                       {"replicate", q.replicate_index},
                       {"members", q.members},
                       {"labels", std::move(labels)}});
  }
  nlohmann::json budget = {
      {"per_sample", cfg.portion_budget_per_sample ? nlohmann::json(*cfg.portion_budget_per_sample)
                                                   : nlohmann::json(nullptr)},
      {"used", std::vector<int>(run.portions_used().begin(), run.portions_used().end())},
      {"limited_queries", run.budget_limited()}};
  nlohmann::json j = {{"session_id", s.id()},
                      {"status", std::string(to_string(s.status()))},
                      {"config", cfg},
                      {"pending", std::move(pending)},
                      {"diagnoses",
                       {{"positive", s.positives()},
                        {"negative", s.negatives()},
                        {"undiagnosed", run.planner().undiagnosed().size()}}},
                      {"portion_budget", std::move(budget)},
                      {"tests", run.physical_tests()},
                      {"events", s.events().size()}};
  if (s.status() == SessionStatus::kAborted) j["abort_reason"] = s.abort_reason();
  return j;
}

void Api::persist(const Session& s) const {
  if (data_dir_.empty()) return;
  s.save_file(data_dir_ / (s.id() + ".json"));
}

std::shared_ptr<Api::Entry> Api::find(const std::string& id) {
  if (!valid_session_id(id)) return nullptr;
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it != sessions_.end()) return it->second;
  if (data_dir_.empty()) return nullptr;
  const auto path = data_dir_ / (id + ".json");
  if (!std::filesystem::exists(path)) return nullptr;
  auto entry = std::make_shared<Entry>();
  entry->session.emplace(Session::load_file(path, clock_));
  sessions_[id] = entry;
  return entry;
}

HttpResponse Api::create_session(const HttpRequest& rq) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(rq.body);
  } catch (const nlohmann::json::exception& e) {
    return error(422, "body is not valid JSON", {{"body", e.what()}});
  }
  const auto key = rq.header("idempotency-key");
  if (key) {
    std::lock_guard lock(mu_);
    auto it = idempotency_.find(*key);
    if (it != idempotency_.end()) {
      if (it->second.request_body != doc.dump())
        return error(409, "idempotency key already used with a different request");
      HttpResponse r;
      r.status = 200;
      r.body = it->second.response_body;
      r.headers["Content-Type"] = "application/json";
      return r;
    }
  }
  const auto problems = session_config_problems(doc);
  if (!problems.empty()) return error(422, "invalid session config", problems);

  std::optional<Session> session;
  try {
    session.emplace(Session::create(doc.get<SessionConfig>(), {}, clock_));
  } catch (const std::exception& e) {
    return error(422, e.what(), {{"portion_budget_per_sample", e.what()}});
  }
  persist(*session);
  HttpResponse r = session_response(201, *session);

  std::lock_guard lock(mu_);
  if (key) {
    auto [it, inserted] = idempotency_.try_emplace(*key, IdempotentCreate{doc.dump(), r.body});
    if (!inserted) {
      // A concurrent request with the same key won; answer with its result.
      if (it->second.request_body != doc.dump())
        return error(409, "idempotency key already used with a different request");
      r.status = 200;
      r.body = it->second.response_body;
      r.headers.erase("ETag");
      return r;
    }
  }
  auto entry = std::make_shared<Entry>();
  entry->session = std::move(session);
  sessions_[entry->session->id()] = entry;
  return r;
}

HttpResponse Api::get_session(const std::string& id) {
  std::shared_ptr<Entry> entry;
  try {
    entry = find(id);
  } catch (const LoadError& e) {
    return error(500, e.what());
  }
  if (!entry) return error(404, "unknown session '" + id + "'");
  std::lock_guard lock(entry->mu);
  return session_response(200, *entry->session);
}

HttpResponse Api::post_outcomes(const std::string& id, const HttpRequest& rq) {
  std::shared_ptr<Entry> entry;
  try {
    entry = find(id);
  } catch (const LoadError& e) {
    return error(500, e.what());
  }
  if (!entry) return error(404, "unknown session '" + id + "'");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(rq.body);
  } catch (const nlohmann::json::exception& e) {
    return error(422, "body is not valid JSON", {{"body", e.what()}});
  }
  if (!doc.is_array() || doc.empty())
    return error(422, "body must be a non-empty array of {query_id, result}");
  std::vector<GroupOutcome> outcomes;
  std::map<std::string, std::string> problems;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& o = doc[i];
    const std::string at = "[" + std::to_string(i) + "]";
    if (!o.is_object() || !o.contains("query_id") || !o.at("query_id").is_number_integer()) {
      problems[at + ".query_id"] = "required integer";
      continue;
    }
    if (!o.contains("result") || !o.at("result").is_string() ||
        (o.at("result") != "+" && o.at("result") != "-")) {
      problems[at + ".result"] = "must be \"+\" or \"-\"";
      continue;
    }
    outcomes.push_back({o.at("query_id").get<QueryId>(), o.at("result") == "+"});
  }
  if (!problems.empty()) return error(422, "invalid outcomes", problems);

  std::lock_guard lock(entry->mu);
  Session& s = *entry->session;
  const auto if_match = rq.header("if-match");
  if (if_match && *if_match != etag(s) && *if_match != "*") {
    HttpResponse r = error(409, "stale ETag: the session was updated by someone else");
    r.headers["ETag"] = etag(s);
    return r;
  }
  if (s.status() != SessionStatus::kActive)
    return error(422, "session is " + std::string(to_string(s.status())));
  try {
    s.report_outcomes(outcomes);
  } catch (const ProtocolError& e) {
    return error(422, e.what(), {{"query_id", e.what()}});
  }
  try {
    persist(s);
  } catch (const std::exception& e) {
    return error(500, std::string("persisting session failed: ") + e.what());
  }
  return session_response(200, s);
}

HttpResponse Api::calc_dilution(const HttpRequest& rq) {
  std::map<std::string, std::string> problems;
  const auto number = [&](std::initializer_list<const char*> names, const char* field,
                          std::optional<double> fallback) -> std::optional<double> {
    const std::string* raw = param(rq, names);
    if (!raw) {
      if (!fallback) problems[field] = "required";
      return fallback;
    }
    auto v = parse_double(*raw);
    if (!v) problems[field] = "not a number: '" + *raw + "'";
    return v;
  };
  const auto vl = number({"vl", "viral-load", "viral_load"}, "vl", std::nullopt);
  const auto v95 = number({"v95"}, "v95", std::nullopt);
  const auto v50 = number({"v50"}, "v50", 0.0);
  const auto gamma_star = number({"gamma_star", "gamma-star"}, "gamma_star", 0.05);
  const auto chi = number({"chi"}, "chi", 1.0);
  int replicates = 1;
  if (const std::string* raw = param(rq, {"r", "replicates"})) {
    const auto v = parse_int(*raw);
    if (!v || *v < 1 || *v > 1000) {
      problems["r"] = "must be an integer >= 1";
    } else {
      replicates = static_cast<int>(*v);
    }
  }
  std::optional<int> tests;
  if (const std::string* raw = param(rq, {"tests"}); raw && *raw != "log-rule") {
    const auto v = parse_int(*raw);
    if (!v || *v < 1 || *v > 1000000) {
      problems["tests"] = "must be an integer >= 1 or log-rule";
    } else {
      tests = static_cast<int>(*v);
    }
  }
  if (!problems.empty()) return error(422, "invalid parameters", problems);
  if (*v50 != 0.0 && *v50 >= *v95) return error(422, "v50 must be smaller than v95", {{"v50", "must be < v95"}});
  TestKitProfile profile;
  profile.v50 = *v50;
  profile.v95 = *v95;
  profile.chi = *chi;
  try {
    if (!(*vl > 0.0)) throw DomainError("viral load must be positive");
    if (!(*chi > 0.0)) throw DomainError("chi must be positive");
    return json_response(200, to_json(dilution_report(profile, *vl, *gamma_star, replicates, tests)));
  } catch (const std::exception& e) {
    return error(422, e.what());
  }
}

HttpResponse Api::calc_nt_average(const HttpRequest& rq) {
  const std::string* a = param(rq, {"alpha"});
  const std::string* n = param(rq, {"n"});
  std::map<std::string, std::string> problems;
  std::optional<double> alpha = a ? parse_double(*a) : std::nullopt;
  std::optional<long long> count = n ? parse_int(*n) : std::nullopt;
  if (!alpha || *alpha < 0.0 || *alpha > 1.0) problems["alpha"] = "must be a number in [0, 1]";
  if (!count || *count < 1 || *count > kDefaultNtTableCap)
    problems["n"] = "must be an integer in [1, " + std::to_string(kDefaultNtTableCap) + "]";
  if (!problems.empty()) return error(422, "invalid parameters", problems);
  try {
    const double g = nt_average_tests(*alpha, static_cast<int>(*count));
    return json_response(200, {{"alpha", *alpha},
                               {"n", *count},
                               {"expected_tests", g},
                               {"conventional", *count},
                               {"savings", 1.0 - g / static_cast<double>(*count)}});
  } catch (const std::exception& e) {
    return error(422, e.what());
  }
}

HttpResponse Api::handle(const HttpRequest& rq) {
  const std::string& p = rq.path;
  const std::string prefix = "/v1/sessions";
  try {
    if (p == "/v1/openapi.json") {
      if (rq.method != "GET") return error(405, "method not allowed");
      return json_response(200, openapi());
    }
    if (p == "/v1/calc/dilution") {
      if (rq.method != "GET") return error(405, "method not allowed");
      return calc_dilution(rq);
    }
    if (p == "/v1/calc/nt-average") {
      if (rq.method != "GET") return error(405, "method not allowed");
      return calc_nt_average(rq);
    }
    if (p == prefix) {
      if (rq.method != "POST") return error(405, "method not allowed");
      return create_session(rq);
    }
    if (p.rfind(prefix + "/", 0) == 0) {
      std::string rest = p.substr(prefix.size() + 1);
      const std::string suffix = "/outcomes";
      if (rest.size() > suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
        rest.resize(rest.size() - suffix.size());
        if (rq.method != "POST") return error(405, "method not allowed");
        return post_outcomes(rest, rq);
      }
      if (rest.find('/') == std::string::npos) {
        if (rq.method != "GET") return error(405, "method not allowed");
        return get_session(rest);
      }
    }
    return error(404, "no route for " + rq.method + " " + p);
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

nlohmann::json Api::openapi() {
  const nlohmann::json err = {{"description", "error"},
                              {"content",
                               {{"application/json",
                                 {{"schema", {{"$ref", "#/components/schemas/Error"}}}}}}}};
  const nlohmann::json session = {
      {"description", "session view"},
      {"headers", {{"ETag", {{"schema", {{"type", "string"}}}}}}},
      {"content",
       {{"application/json", {{"schema", {{"$ref", "#/components/schemas/ApiSession"}}}}}}}};
  const auto qparam = [](const char* name, const char* type, bool required) {
    return nlohmann::json{{"name", name},
                          {"in", "query"},
                          {"required", required},
                          {"schema", {{"type", type}}}};
  };
  nlohmann::json doc = {
      {"openapi", "3.0.3"},
      {"info",
       {{"title", "pooltest session service"},
        {"version", "1.0.0"},
        {"description", "Adaptive pooled-testing sessions. No authentication."}}},
      {"paths",
       {{"/v1/sessions",
         {{"post",
           {{"summary", "Create a session"},
            {"parameters",
             {{{"name", "Idempotency-Key"}, {"in", "header"}, {"required", false},
               {"schema", {{"type", "string"}}}}}},
            {"requestBody",
             {{"required", true},
              {"content",
               {{"application/json",
                 {{"schema", {{"$ref", "#/components/schemas/SessionConfig"}}}}}}}}},
            {"responses",
             {{"201", session}, {"200", session}, {"409", err}, {"422", err}}}}}}},
        {"/v1/sessions/{id}",
         {{"get",
           {{"summary", "Current session state"},
            {"parameters",
             {{{"name", "id"}, {"in", "path"}, {"required", true},
               {"schema", {{"type", "string"}}}}}},
            {"responses", {{"200", session}, {"404", err}}}}}}},
        {"/v1/sessions/{id}/outcomes",
         {{"post",
           {{"summary", "Report outcomes of pending queries"},
            {"parameters",
             {{{"name", "id"}, {"in", "path"}, {"required", true},
               {"schema", {{"type", "string"}}}},
              {{"name", "If-Match"}, {"in", "header"}, {"required", false},
               {"schema", {{"type", "string"}}}}}},
            {"requestBody",
             {{"required", true},
              {"content",
               {{"application/json",
                 {{"schema",
                   {{"type", "array"},
                    {"items",
                     {{"type", "object"},
                      {"required", {"query_id", "result"}},
                      {"properties",
                       {{"query_id", {{"type", "integer"}}},
                        {"result", {{"type", "string"}, {"enum", {"+", "-"}}}}}}}}}}}}}}}},
            {"responses", {{"200", session}, {"404", err}, {"409", err}, {"422", err}}}}}}},
        {"/v1/calc/dilution",
         {{"get",
           {{"summary", "Pool size and portion budget"},
            {"parameters",
             {qparam("vl", "number", true), qparam("v95", "number", true),
              qparam("v50", "number", false), qparam("gamma_star", "number", false),
              qparam("r", "integer", false), qparam("tests", "string", false),
              qparam("chi", "number", false)}},
            {"responses", {{"200", {{"description", "dilution report"}}}, {"422", err}}}}}}},
        {"/v1/calc/nt-average",
         {{"get",
           {{"summary", "Expected tests of nested testing"},
            {"parameters", {qparam("alpha", "number", true), qparam("n", "integer", true)}},
            {"responses", {{"200", {{"description", "expected tests"}}}, {"422", err}}}}}}},
        {"/v1/openapi.json",
         {{"get", {{"summary", "This document"}, {"responses", {{"200", {{"description", "OpenAPI"}}}}}}}}}}},
      {"components",
       {{"schemas",
         {{"Error",
           {{"type", "object"},
            {"properties",
             {{"error", {{"type", "string"}}},
              {"fields", {{"type", "object"}, {"additionalProperties", {{"type", "string"}}}}}}}}},
          {"SessionConfig",
           {{"type", "object"},
            {"required", {"planner"}},
            {"properties",
             {{"planner",
               {{"type", "object"},
                {"properties",
                 {{"algorithm", {{"type", "string"}, {"enum", {"gbs", "mst", "nt", "individual"}}}},
                  {"n", {{"type", "integer"}}},
                  {"d", {{"type", "integer"}}},
                  {"alpha", {{"type", "number"}}},
                  {"stages", {{"type", "integer"}}},
                  {"verify", {{"type", "boolean"}}}}}}},
              {"profile", {{"type", "object"}}},
              {"replication",
               {{"type", "object"},
                {"properties",
                 {{"r", {{"type", "integer"}}},
                  {"mode", {{"type", "string"}, {"enum", {"none", "negatives-only", "all"}}}}}}}},
              {"portion_budget_per_sample", {{"type", "integer"}}},
              {"labels", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}}},
          {"ApiSession",
           {{"type", "object"},
            {"properties",
             {{"session_id", {{"type", "string"}}},
              {"status", {{"type", "string"}, {"enum", {"active", "complete", "aborted"}}}},
              {"pending", {{"type", "array"}}},
              {"diagnoses", {{"type", "object"}}},
              {"portion_budget", {{"type", "object"}}}}}}}}}}}};
  return doc;
}

}  // namespace pooltest
