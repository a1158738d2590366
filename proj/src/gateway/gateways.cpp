#include "hetbridge/gateway/gateways.hpp"

#include <nlohmann/json.hpp>

#include "hetbridge/core/log.hpp"
#include "hetbridge/gateway/normalize.hpp"
#include "hetbridge/mqtt/topic.hpp"

namespace hetbridge::gateway {

using nlohmann::json;

namespace {

constexpr const char* kBadQuery = R"({"error":"bad_query"})";
constexpr const char* kUnavailable = R"({"error":"unavailable"})";

coap::Response json_response(coap::Code code, std::string payload) {
  return {code, std::move(payload), coap::kContentFormatJson};
}

}  // namespace

QueryReply handle_mqtt_query(std::string_view topic, std::string_view payload, MiddlewareClient& middleware,
                             std::string_view response_prefix) {
  const auto slash = topic.rfind('/');
  const std::string cid(slash == std::string_view::npos ? topic : topic.substr(slash + 1));
  QueryReply reply{std::string(response_prefix) + cid, kBadQuery};

  const auto q = json::parse(payload, nullptr, false);
  if (q.is_discarded() || !q.is_object()) return reply;

  std::map<std::string, std::string> params;
  for (const auto& [key, value] : q.items()) {
    if (key == "protocol" && value.is_string()) {
      params["protocol"] = value.get<std::string>();
    } else if (key == "since" && value.is_string()) {
      params["since"] = value.get<std::string>();
    } else if (key == "limit" && value.is_number_integer() && value.get<std::int64_t>() >= 0) {
      params["limit"] = std::to_string(value.get<std::int64_t>());
    } else {
      return reply;
    }
  }
  if (params.count("limit") && params["limit"] == "0") {
    reply.payload = "[]";
    return reply;
  }

  auto res = middleware.get("/api/v1/readings", params);
  if (!res) {
    reply.payload = kUnavailable;
  } else if (res->status == 200) {
    reply.payload = res->body;
  } else if (res->status >= 500) {
    reply.payload = kUnavailable;
  }
  return reply;
}

coap::Response handle_coap_get(const std::vector<std::string>& queries, MiddlewareClient& middleware) {
  std::map<std::string, std::string> params;
  for (const auto& q : queries) {
    const auto eq = q.find('=');
    const std::string key = q.substr(0, eq);
    if (eq == std::string::npos || (key != "protocol" && key != "limit" && key != "since")) {
      return json_response(coap::codes::bad_request, kBadQuery);
    }
    params[key] = q.substr(eq + 1);
  }
  // The middleware's limit floor is 1; a zero limit is answered locally.
  if (params.count("limit") && params["limit"] == "0") return json_response(coap::codes::content, "[]");

  auto res = middleware.get("/api/v1/readings", params);
  if (!res || res->status >= 500) return json_response(coap::codes::service_unavailable, kUnavailable);
  if (res->status != 200) return json_response(coap::codes::bad_request, res->body);
  return json_response(coap::codes::content, res->body);
}

MqttGateway::MqttGateway(MqttGatewayConfig config)
    : config_(std::move(config)),
      middleware_(config_.middleware_base_url),
      forwarder_(middleware_, config_.name, config_.forward_retry) {}

MqttGateway::~MqttGateway() { stop(); }

void MqttGateway::start() {
  forwarder_.register_gateway();
  client_ = std::make_unique<mqtt::Client>(config_.broker, config_.client_id);
  client_->on_error([name = config_.name](const std::string& reason) {
    log::error("gateway {}: broker connection lost: {}", name, reason);
  });
  client_->subscribe(config_.query_filter,
                     [this](const std::string& topic, const std::string& payload) { on_query(topic, payload); });
  client_->subscribe(config_.subscribe_filter,
                     [this](const std::string& topic, const std::string& payload) { on_data(topic, payload); });
  log::info("gateway {} subscribed to {} and {}", config_.name, config_.subscribe_filter, config_.query_filter);
}

void MqttGateway::stop() {
  if (client_) {
    client_->disconnect();
    client_.reset();
  }
  middleware_.close();
}

void MqttGateway::on_query(const std::string& topic, const std::string& payload) {
  ++queries_;
  const QueryReply reply = handle_mqtt_query(topic, payload, middleware_, config_.response_prefix);
  try {
    client_->publish(reply.topic, reply.payload, 0);
  } catch (const mqtt::ClientError& e) {
    log::warn("gateway {}: could not publish query reply: {}", config_.name, e.what());
  }
}

void MqttGateway::on_data(const std::string& topic, const std::string& payload) {
  // "iot/query/data" matches both filters; it belongs to the query path.
  if (mqtt::topic_matches(config_.query_filter, topic)) return;
  ++received_;
  IngestRecord rec;
  try {
    rec = normalize_mqtt(topic, payload);
  } catch (const NormalizeError& e) {
    ++rejected_;
    log::warn("gateway {}: rejected message on {}: {}", config_.name, topic, e.what());
    return;
  }
  try {
    forwarder_.forward(rec);
  } catch (const ForwardFailed&) {
    // counted by the forwarder
  }
}

GatewayCounters MqttGateway::counters() const {
  const ForwardCounters f = forwarder_.counters();
  return {received_.load(), rejected_.load(), f.forwarded, f.dropped, queries_.load()};
}

CoapGateway::CoapGateway(CoapGatewayConfig config)
    : config_(std::move(config)),
      middleware_(config_.middleware_base_url),
      forwarder_(middleware_, config_.name, config_.forward_retry) {}

CoapGateway::~CoapGateway() { stop(); }

void CoapGateway::start() {
  forwarder_.register_gateway();
  coap::ResourceMap resources;
  resources[config_.ingest_path] = [this](const coap::Message& m) { return on_ingest(m); };
  resources[config_.readings_path] = [this](const coap::Message& m) { return on_readings(m); };
  server_ = std::make_unique<coap::Server>(config_.bind, std::move(resources));
  server_->start();
}

void CoapGateway::stop() {
  if (server_) {
    server_->stop();
    server_.reset();
  }
  middleware_.close();
}

std::uint16_t CoapGateway::port() const { return server_ ? server_->port() : 0; }

coap::Response CoapGateway::on_ingest(const coap::Message& req) {
  if (req.code != coap::codes::post) return {coap::codes::method_not_allowed, {}, std::nullopt};
  ++received_;
  IngestRecord rec;
  try {
    rec = normalize_coap(req.payload);
  } catch (const NormalizeError& e) {
    ++rejected_;
    log::warn("gateway {}: rejected ingest: {}", config_.name, e.what());
    return {coap::codes::bad_request, e.what(), std::nullopt};
  }
  try {
    return json_response(coap::codes::created, forwarder_.forward(rec));
  } catch (const ForwardFailed&) {
    return json_response(coap::codes::service_unavailable, kUnavailable);
  }
}

coap::Response CoapGateway::on_readings(const coap::Message& req) {
  if (req.code != coap::codes::get) return {coap::codes::method_not_allowed, {}, std::nullopt};
  ++queries_;
  return handle_coap_get(req.uri_queries(), middleware_);
}

GatewayCounters CoapGateway::counters() const {
  const ForwardCounters f = forwarder_.counters();
  return {received_.load(), rejected_.load(), f.forwarded, f.dropped, queries_.load()};
}

}  // namespace hetbridge::gateway
