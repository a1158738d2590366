#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "hetbridge/app/config.hpp"
#include "hetbridge/gateway/gateways.hpp"
#include "hetbridge/middleware/http_server.hpp"
#include "hetbridge/middleware/service.hpp"
#include "hetbridge/mqtt/broker.hpp"
#include "hetbridge/storage/principals.hpp"
#include "hetbridge/storage/store.hpp"

namespace hetbridge::app {

struct StackOptions {
  std::string host = "127.0.0.1";
  /// Zero ports bind ephemerally.
  Ports ports{0, 0, 0};
  std::optional<std::filesystem::path> wal;
  middleware::ServiceConfig service;
};

/// Broker, middleware and both gateways in one process.
class Stack {
 public:
  explicit Stack(StackOptions options);
  ~Stack();
  Stack(const Stack&) = delete;
  Stack& operator=(const Stack&) = delete;

  /// Starts broker, middleware, then the gateways (which register themselves).
  void start();
  /// Gateways first, then middleware, then broker.
  void stop();

  net::Endpoint broker_endpoint() const;
  net::Endpoint coap_endpoint() const;
  std::string middleware_url() const;

  storage::ReadingStore& store() { return *store_; }
  gateway::MqttGateway& mqtt_gateway() { return *mqtt_gateway_; }
  gateway::CoapGateway& coap_gateway() { return *coap_gateway_; }

 private:
  StackOptions options_;
  std::unique_ptr<storage::ReadingStore> store_;
  storage::PrincipalTable principals_;
  std::unique_ptr<middleware::Service> service_;
  std::unique_ptr<mqtt::BrokerServer> broker_;
  std::unique_ptr<middleware::HttpServer> http_;
  std::unique_ptr<gateway::MqttGateway> mqtt_gateway_;
  std::unique_ptr<gateway::CoapGateway> coap_gateway_;
};

}  // namespace hetbridge::app
