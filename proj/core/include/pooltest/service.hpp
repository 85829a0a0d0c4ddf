#pragma once

// HTTP JSON API over the session module, independent of the transport.
//
// No authentication: the service is meant to run behind a lab network.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "pooltest/session.hpp"

namespace pooltest {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // keys lower-case
  std::string body;

  std::optional<std::string> header(const std::string& lower_name) const;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

class Api {
 public:
  // Sessions are persisted as <data_dir>/<session_id>.json; an empty data_dir keeps
  // them in memory only.
  explicit Api(std::filesystem::path data_dir = {}, Session::Clock clock = {});

  HttpResponse handle(const HttpRequest& request);

  // ApiSession view of a session.
  static nlohmann::json view(const Session& session);
  static std::string etag(const Session& session);
  static nlohmann::json openapi();

 private:
  struct Entry {
    std::mutex mu;
    std::optional<Session> session;
  };
  struct IdempotentCreate {
    std::string request_body;
    std::string response_body;
  };

  HttpResponse create_session(const HttpRequest& request);
  HttpResponse get_session(const std::string& id);
  HttpResponse post_outcomes(const std::string& id, const HttpRequest& request);
  HttpResponse calc_dilution(const HttpRequest& request);
  HttpResponse calc_nt_average(const HttpRequest& request);

  std::shared_ptr<Entry> find(const std::string& id);
  void persist(const Session& session) const;

  std::filesystem::path data_dir_;
  Session::Clock clock_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, IdempotentCreate> idempotency_;
};

// Field-level problems in a SessionConfig document ("planner.alpha" -> message).
std::map<std::string, std::string> session_config_problems(const nlohmann::json& doc);

}  // namespace pooltest
