#include "hetbridge/gateway/middleware_client.hpp"

#define CPPHTTPLIB_TCP_NODELAY true
#include <httplib.h>

namespace hetbridge::gateway {

struct MiddlewareClient::Impl {
  explicit Impl(const std::string& url) : client(url) {}
  httplib::Client client;
};

MiddlewareClient::MiddlewareClient(const std::string& base_url, std::chrono::milliseconds timeout)
    : base_url_(base_url), impl_(std::make_unique<Impl>(base_url)) {
  impl_->client.set_connection_timeout(timeout);
  impl_->client.set_read_timeout(timeout);
  impl_->client.set_write_timeout(timeout);
  impl_->client.set_keep_alive(true);
}

MiddlewareClient::~MiddlewareClient() = default;

std::optional<HttpReply> MiddlewareClient::post(const std::string& path, const std::string& json_body,
                                                const std::string& bearer_token) {
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = impl_->client.Post(path, headers, json_body, "application/json");
  if (!res) return std::nullopt;
  return HttpReply{res->status, res->body};
}

std::optional<HttpReply> MiddlewareClient::get(const std::string& path,
                                               const std::map<std::string, std::string>& params) {
  httplib::Params p(params.begin(), params.end());
  auto res = impl_->client.Get(path, p, httplib::Headers{});
  if (!res) return std::nullopt;
  return HttpReply{res->status, res->body};
}

void MiddlewareClient::close() { impl_->client.stop(); }

}  // namespace hetbridge::gateway
