#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hetbridge/coap/server.hpp"
#include "hetbridge/gateway/forwarder.hpp"
#include "hetbridge/gateway/middleware_client.hpp"
#include "hetbridge/mqtt/client.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::gateway {

struct MqttGatewayConfig {
  std::string middleware_base_url = "http://127.0.0.1:8080";
  std::string name = "mqtt-gw";
  net::Endpoint broker{"127.0.0.1", 1883};
  std::string client_id = "mqtt-gateway";
  std::string subscribe_filter = "iot/+/data";
  /// The last level of a query topic names the client; replies go to response_prefix + that name.
  std::string query_filter = "iot/query/+";
  std::string response_prefix = "iot/response/";
  RetryPolicy forward_retry;
};

struct CoapGatewayConfig {
  std::string middleware_base_url = "http://127.0.0.1:8080";
  std::string name = "coap-gw";
  net::Endpoint bind{"127.0.0.1", 5683};
  std::string ingest_path = "ingest";
  std::string readings_path = "readings";
  RetryPolicy forward_retry;
};

struct GatewayCounters {
  std::uint64_t received = 0;
  /// Normalization failures.
  std::uint64_t rejected = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t queries = 0;
};

struct QueryReply {
  std::string topic;
  std::string payload;
};

/// Answers an MQTT query published on `iot/query/<cid>` with the middleware's
/// JSON array (or `{"error":...}`) destined for `<response_prefix><cid>`.
QueryReply handle_mqtt_query(std::string_view topic, std::string_view payload, MiddlewareClient& middleware,
                             std::string_view response_prefix = "iot/response/");

/// Translates `protocol=`, `limit=`, `since=` Uri-Query options into a
/// middleware GET and returns its JSON array verbatim as 2.05 Content.
/// Middleware unreachable -> 5.03; rejected query -> 4.00.
coap::Response handle_coap_get(const std::vector<std::string>& queries, MiddlewareClient& middleware);

/// MQTT -> middleware bridge. Subscribes to device data and query topics.
class MqttGateway {
 public:
  explicit MqttGateway(MqttGatewayConfig config);
  ~MqttGateway();

  /// Registers with the middleware, connects to the broker and subscribes.
  void start();
  void stop();
  GatewayCounters counters() const;

 private:
  void on_query(const std::string& topic, const std::string& payload);
  void on_data(const std::string& topic, const std::string& payload);

  MqttGatewayConfig config_;
  MiddlewareClient middleware_;
  Forwarder forwarder_;
  std::unique_ptr<mqtt::Client> client_;
  std::atomic<std::uint64_t> received_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::atomic<std::uint64_t> queries_{0};
};

/// CoAP -> middleware bridge serving POST /ingest and GET /readings.
class CoapGateway {
 public:
  explicit CoapGateway(CoapGatewayConfig config);
  ~CoapGateway();

  void start();
  void stop();
  std::uint16_t port() const;
  GatewayCounters counters() const;

 private:
  coap::Response on_ingest(const coap::Message& req);
  coap::Response on_readings(const coap::Message& req);

  CoapGatewayConfig config_;
  MiddlewareClient middleware_;
  Forwarder forwarder_;
  std::unique_ptr<coap::Server> server_;
  std::atomic<std::uint64_t> received_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::atomic<std::uint64_t> queries_{0};
};

}  // namespace hetbridge::gateway
