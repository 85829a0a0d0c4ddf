#include <csignal>
#include <cstdlib>
#include <iostream>

#include "pooltest/http_server.hpp"
#include "pooltest/service.hpp"

namespace {

pooltest::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main() {
  const char* data = std::getenv("GT_DATA_DIR");
  const char* bind = std::getenv("GT_BIND_ADDR");
  try {
    pooltest::Api api(data && *data ? data : "gt-data");
    pooltest::HttpServer server(api);
    const auto address = pooltest::parse_bind_address(bind ? bind : "");
    const int port = server.bind(address);
    if (port < 0) {
      std::cerr << "gtserve: cannot bind " << address.host << ":" << address.port << "\n";
      return 1;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "gtserve: listening on " << address.host << ":" << port
              << " (no authentication; keep it on the lab network)\n";
    server.listen();
    g_server = nullptr;
  } catch (const std::exception& e) {
    std::cerr << "gtserve: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
