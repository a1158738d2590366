#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <thread>

#include "hetbridge/middleware/service.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::middleware {

/// HTTP/1.1 front end: registers exactly Service::routes() and forwards each
/// request to Service::handle with the clock read at handler entry.
class HttpServer {
 public:
  HttpServer(Service& service, const net::Endpoint& bind);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks an ephemeral port.
  void start();
  void stop();
  std::uint16_t port() const noexcept { return port_; }

 private:
  struct Impl;

  Service& service_;
  net::Endpoint bind_;
  std::uint16_t port_ = 0;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace hetbridge::middleware
