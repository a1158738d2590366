#include "hetbridge/gateway/forwarder.hpp"

#include <thread>

#include <nlohmann/json.hpp>

#include "hetbridge/core/json_codec.hpp"
#include "hetbridge/core/log.hpp"

namespace hetbridge::gateway {

Forwarder::Forwarder(MiddlewareClient& client, std::string gateway_name, RetryPolicy retry)
    : client_(client), name_(std::move(gateway_name)), retry_(retry) {}

std::string Forwarder::token() const {
  std::lock_guard lock(token_mu_);
  return token_;
}

void Forwarder::register_gateway() {
  const std::string body = nlohmann::json{{"name", name_}, {"kind", "gateway"}}.dump();
  auto reply = client_.post("/api/v1/devices", body);
  if (!reply) throw RegistrationFailed("middleware unreachable at " + client_.base_url());
  if (reply->status != 201) {
    throw RegistrationFailed("registration of '" + name_ + "' returned " + std::to_string(reply->status) + ": " +
                             reply->body);
  }
  const auto j = nlohmann::json::parse(reply->body, nullptr, false);
  if (j.is_discarded() || !j.contains("token") || !j["token"].is_string()) {
    throw RegistrationFailed("registration response carries no token");
  }
  std::lock_guard lock(token_mu_);
  token_ = j["token"].get<std::string>();
}

std::string Forwarder::drop(const std::string& why) {
  ++dropped_;
  log::warn("gateway {}: dropped record: {}", name_, why);
  throw ForwardFailed(why);
}

std::string Forwarder::forward(const IngestRecord& rec) {
  const std::string body = serialize(rec);
  bool reregistered = false;
  std::string last_error = "no attempt made";

  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    auto reply = client_.post("/api/v1/readings", body, token());
    if (reply && reply->status == 201) {
      ++forwarded_;
      return reply->body;
    }
    if (reply && reply->status == 401 && !reregistered) {
      reregistered = true;
      try {
        register_gateway();
      } catch (const RegistrationFailed& e) {
        return drop(std::string("re-registration failed: ") + e.what());
      }
      --attempt;  // the retry after re-registering does not use up an attempt
      continue;
    }
    if (reply && reply->status < 500) {
      return drop("middleware rejected record with " + std::to_string(reply->status) + ": " + reply->body);
    }
    last_error = reply ? "status " + std::to_string(reply->status) : "middleware unreachable";
    if (attempt < retry_.attempts) std::this_thread::sleep_for(retry_.backoff);
  }
  return drop("retries exhausted (" + last_error + ")");
}

}  // namespace hetbridge::gateway
