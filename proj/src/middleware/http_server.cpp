#include "hetbridge/middleware/http_server.hpp"

#define CPPHTTPLIB_TCP_NODELAY true
#include <httplib.h>

#include "hetbridge/core/log.hpp"

namespace hetbridge::middleware {

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Service& service, const net::Endpoint& bind)
    : service_(service), bind_(bind), impl_(std::make_unique<Impl>()) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  auto& srv = impl_->server;
  for (const Route& route : Service::routes()) {
    auto handler = [this, route](const httplib::Request& req, httplib::Response& res) {
      Request r;
      r.received_at = Timestamp::now();
      r.method = route.method;
      r.path = route.path;
      if (req.has_header("Authorization")) r.authorization = req.get_header_value("Authorization");
      for (const auto& [k, v] : req.params) r.query[k] = v;
      r.body = req.body;
      const ApiResponse out = service_.handle(r);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    if (route.method == "GET") {
      srv.Get(route.path, handler);
    } else if (route.method == "POST") {
      srv.Post(route.path, handler);
    }
  }
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const bool missing = res.status == 404;
      res.set_content(missing ? R"({"error":"not_found","detail":"no such route"})"
                              : R"({"error":"http_error","detail":"request rejected"})",
                      "application/json");
    }
  });

  if (bind_.port == 0) {
    const int p = srv.bind_to_any_port(bind_.host);
    if (p <= 0) throw net::NetError(net::NetError::Kind::io, "cannot bind http server on " + bind_.host);
    port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!srv.bind_to_port(bind_.host, bind_.port)) {
      throw net::NetError(net::NetError::Kind::io, "cannot bind http server on " + bind_.to_string());
    }
    port_ = bind_.port;
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  log::info("middleware listening on http://{}:{}", bind_.host, port_);
}

void HttpServer::stop() {
  if (!thread_.joinable()) return;
  impl_->server.stop();
  thread_.join();
}

}  // namespace hetbridge::middleware
