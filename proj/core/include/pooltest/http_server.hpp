#pragma once

// Binds an Api to an HTTP/1.1 listener (cpp-httplib).

#include <memory>
#include <string>

#include "pooltest/service.hpp"

namespace pooltest {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "host:port", ":port" or "host". Throws ConfigurationError on a malformed value.
BindAddress parse_bind_address(const std::string& text);

class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const BindAddress& address);
  // Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pooltest
