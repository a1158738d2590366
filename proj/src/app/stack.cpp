#include "hetbridge/app/stack.hpp"

namespace hetbridge::app {

Stack::Stack(StackOptions options) : options_(std::move(options)) {
  store_ = options_.wal ? std::make_unique<storage::ReadingStore>(*options_.wal)
                        : std::make_unique<storage::ReadingStore>();
  service_ = std::make_unique<middleware::Service>(*store_, principals_, options_.service);
}

Stack::~Stack() { stop(); }

void Stack::start() {
  broker_ = std::make_unique<mqtt::BrokerServer>(net::Endpoint{options_.host, options_.ports.mqtt});
  broker_->start();
  http_ = std::make_unique<middleware::HttpServer>(*service_, net::Endpoint{options_.host, options_.ports.http});
  http_->start();

  gateway::MqttGatewayConfig mcfg;
  mcfg.middleware_base_url = middleware_url();
  mcfg.broker = broker_endpoint();
  mqtt_gateway_ = std::make_unique<gateway::MqttGateway>(mcfg);
  mqtt_gateway_->start();

  gateway::CoapGatewayConfig ccfg;
  ccfg.middleware_base_url = middleware_url();
  ccfg.bind = {options_.host, options_.ports.coap};
  coap_gateway_ = std::make_unique<gateway::CoapGateway>(ccfg);
  coap_gateway_->start();
}

void Stack::stop() {
  if (mqtt_gateway_) mqtt_gateway_->stop();
  if (coap_gateway_) coap_gateway_->stop();
  if (http_) http_->stop();
  if (broker_) broker_->stop();
}

net::Endpoint Stack::broker_endpoint() const { return {options_.host, broker_->port()}; }
net::Endpoint Stack::coap_endpoint() const { return {options_.host, coap_gateway_->port()}; }
std::string Stack::middleware_url() const { return "http://" + options_.host + ":" + std::to_string(http_->port()); }

}  // namespace hetbridge::app
