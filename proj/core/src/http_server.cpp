#include "pooltest/http_server.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

#include "pooltest/errors.hpp"

namespace pooltest {

struct HttpServer::Impl {
  Api& api;
  httplib::Server server;

  explicit Impl(Api& a) : api(a) {
    const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      HttpRequest rq;
      rq.method = req.method;
      rq.path = req.path;
      rq.body = req.body;
      for (const auto& [k, v] : req.params) rq.query.emplace(k, v);
      for (const auto& [k, v] : req.headers) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        rq.headers.emplace(std::move(key), v);
      }
      const HttpResponse out = api.handle(rq);
      res.status = out.status;
      std::string type = "application/json";
      for (const auto& [k, v] : out.headers) {
        if (k == "Content-Type") {
          type = v;
        } else {
          res.set_header(k, v);
        }
      }
      res.set_content(out.body, type);
    };
    const std::string any = R"(/.*)";
    server.Get(any, handler);
    server.Post(any, handler);
    server.Put(any, handler);
    server.Delete(any, handler);
    server.Patch(any, handler);
  }
};

BindAddress parse_bind_address(const std::string& text) {
  BindAddress out;
  if (text.empty()) return out;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    out.host = text;
    return out;
  }
  if (colon > 0) out.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  if (port.empty() || port.size() > 5 ||
      !std::all_of(port.begin(), port.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ConfigurationError("bind address: bad port in '" + text + "'");
  out.port = std::stoi(port);
  if (out.port > 65535) throw ConfigurationError("bind address: port out of range in '" + text + "'");
  return out;
}

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>(api)) {}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const BindAddress& address) {
  if (address.port == 0) return impl_->server.bind_to_any_port(address.host);
  return impl_->server.bind_to_port(address.host, address.port) ? address.port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace pooltest
