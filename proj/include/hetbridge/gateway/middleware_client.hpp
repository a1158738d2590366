#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace hetbridge::gateway {

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Thin HTTP client for the middleware API. nullopt means the request never
/// got a response (connect failure, timeout). Safe for concurrent use.
class MiddlewareClient {
 public:
  /// `base_url` like "http://127.0.0.1:8080".
  explicit MiddlewareClient(const std::string& base_url,
                            std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
  ~MiddlewareClient();
  MiddlewareClient(const MiddlewareClient&) = delete;
  MiddlewareClient& operator=(const MiddlewareClient&) = delete;

  std::optional<HttpReply> post(const std::string& path, const std::string& json_body,
                                const std::string& bearer_token = {});
  std::optional<HttpReply> get(const std::string& path, const std::map<std::string, std::string>& params = {});

  /// Closes the kept-alive connection; a later request reconnects.
  void close();

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  struct Impl;
  std::string base_url_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hetbridge::gateway
