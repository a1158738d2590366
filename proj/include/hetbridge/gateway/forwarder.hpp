#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <stdexcept>
#include <string>

#include "hetbridge/core/model.hpp"
#include "hetbridge/gateway/middleware_client.hpp"

namespace hetbridge::gateway {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};
};

class ForwardFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistrationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForwardCounters {
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
};

/// Posts normalized records to the middleware under one gateway credential.
///
/// 5xx and connect failures are retried with a fixed backoff; a 401 triggers
/// one re-registration. A record that cannot be delivered is dropped and
/// counted, so every forward() call ends in exactly one of the two counters.
class Forwarder {
 public:
  Forwarder(MiddlewareClient& client, std::string gateway_name, RetryPolicy retry = {});

  /// Obtains a token via POST /api/v1/devices. Throws RegistrationFailed.
  void register_gateway();

  /// Returns the middleware's 201 body. Throws ForwardFailed.
  std::string forward(const IngestRecord& rec);

  ForwardCounters counters() const noexcept { return {forwarded_.load(), dropped_.load()}; }
  std::string token() const;

 private:
  std::string drop(const std::string& why);

  MiddlewareClient& client_;
  std::string name_;
  RetryPolicy retry_;
  mutable std::mutex token_mu_;
  std::string token_;
  std::atomic<std::uint64_t> forwarded_{0};
  std::atomic<std::uint64_t> dropped_{0};
};

}  // namespace hetbridge::gateway
