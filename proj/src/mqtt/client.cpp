#include "hetbridge/mqtt/client.hpp"

#include "hetbridge/core/log.hpp"
#include "hetbridge/mqtt/broker.hpp"
#include "hetbridge/mqtt/topic.hpp"

namespace hetbridge::mqtt {

Client::Client(const net::Endpoint& broker, std::string client_id, ClientOptions options)
    : client_id_(std::move(client_id)), options_(options) {
  try {
    sock_ = net::tcp_connect(broker, options_.connect_timeout);
  } catch (const net::NetError& e) {
    throw ClientError(ClientError::Kind::connection_refused, e.what());
  }

  send(Connect{client_id_, true, 0, 4});
  if (!net::wait_readable(sock_.fd(), options_.ack_timeout)) {
    throw ClientError(ClientError::Kind::ack_timeout, "no CONNACK from " + broker.to_string());
  }
  std::optional<Packet> reply;
  try {
    reply = read_packet(sock_);
  } catch (const CodecError& e) {
    throw ClientError(ClientError::Kind::broken_connection, std::string("bad CONNACK: ") + e.what());
  }
  const auto* ack = reply ? std::get_if<Connack>(&*reply) : nullptr;
  if (ack == nullptr) throw ClientError(ClientError::Kind::broken_connection, "expected CONNACK");
  if (ack->return_code != 0) {
    throw ClientError(ClientError::Kind::connection_refused,
                      "broker refused connection, code " + std::to_string(ack->return_code));
  }
  connected_ = true;
  reader_ = std::thread([this] { reader_loop(); });
}

Client::~Client() { disconnect(); }

void Client::disconnect() {
  {
    std::lock_guard lock(mu_);
    if (closing_) return;
    closing_ = true;
  }
  if (connected()) {
    try {
      send(Disconnect{});
    } catch (const ClientError&) {
    }
  }
  sock_.shutdown();
  if (reader_.joinable()) reader_.join();
  std::lock_guard lock(mu_);
  connected_ = false;
  cv_.notify_all();
}

bool Client::connected() const {
  std::lock_guard lock(mu_);
  return connected_;
}

void Client::on_error(ErrorHandler handler) {
  std::lock_guard lock(mu_);
  on_error_ = std::move(handler);
}

std::uint16_t Client::next_packet_id() {
  std::lock_guard lock(mu_);
  if (++last_packet_id_ == 0) last_packet_id_ = 1;
  return last_packet_id_;
}

void Client::send(const Packet& p) {
  const Bytes bytes = encode_packet(p);
  std::lock_guard lock(write_mu_);
  try {
    net::write_all(sock_, bytes);
  } catch (const net::NetError& e) {
    throw ClientError(ClientError::Kind::broken_connection, e.what());
  }
}

void Client::publish(std::string_view topic, std::string_view payload, int qos) {
  if (qos != 0 && qos != 1) throw std::invalid_argument("qos must be 0 or 1");
  if (!is_valid_topic(topic)) throw std::invalid_argument("invalid topic name: " + std::string(topic));
  {
    std::lock_guard lock(mu_);
    if (!connected_) throw ClientError(ClientError::Kind::broken_connection, "not connected: " + broken_reason_);
  }
  Publish p;
  p.topic = std::string(topic);
  p.payload = std::string(payload);
  p.qos = static_cast<std::uint8_t>(qos);
  if (qos == 1) p.packet_id = next_packet_id();
  send(p);
  if (qos == 1) await_ack(*p.packet_id, "PUBACK");
}

void Client::subscribe(std::string_view filter, MessageHandler on_message) {
  if (!is_valid_filter(filter)) throw InvalidFilter("invalid topic filter: " + std::string(filter));
  {
    std::lock_guard lock(mu_);
    subscriptions_.emplace_back(std::string(filter), std::move(on_message));
  }
  Subscribe s;
  s.packet_id = next_packet_id();
  s.topics.push_back({std::string(filter), 0});
  send(s);
  const Packet ack = await_ack(s.packet_id, "SUBACK");
  const auto& codes = std::get<Suback>(ack).return_codes;
  if (codes.empty() || codes.front() == kSubackFailure) {
    throw ClientError(ClientError::Kind::subscribe_rejected, "broker rejected filter " + std::string(filter));
  }
}

Packet Client::await_ack(std::uint16_t packet_id, const char* what) {
  std::unique_lock lock(mu_);
  const bool arrived = cv_.wait_for(lock, options_.ack_timeout,
                                    [&] { return acks_.count(packet_id) > 0 || !connected_; });
  if (auto it = acks_.find(packet_id); it != acks_.end()) {
    Packet p = std::move(it->second);
    acks_.erase(it);
    return p;
  }
  if (!arrived) {
    throw ClientError(ClientError::Kind::ack_timeout,
                      std::string("no ") + what + " for packet id " + std::to_string(packet_id));
  }
  throw ClientError(ClientError::Kind::broken_connection, "connection lost: " + broken_reason_);
}

void Client::fail_all(const std::string& reason) {
  ErrorHandler handler;
  {
    std::lock_guard lock(mu_);
    if (!connected_) return;
    connected_ = false;
    broken_reason_ = reason;
    if (!closing_) handler = on_error_;
  }
  cv_.notify_all();
  if (handler) handler(reason);
}

void Client::reader_loop() {
  std::string reason = "closed by broker";
  try {
    for (;;) {
      std::optional<Packet> p = read_packet(sock_);
      if (!p) break;
      if (auto* pub = std::get_if<Publish>(&*p)) {
        std::vector<MessageHandler> handlers;
        {
          std::lock_guard lock(mu_);
          for (const auto& [filter, handler] : subscriptions_) {
            if (topic_matches(filter, pub->topic)) handlers.push_back(handler);
          }
        }
        for (auto& h : handlers) {
          try {
            h(pub->topic, pub->payload);
          } catch (const std::exception& e) {
            log::error("mqtt client {}: message handler threw: {}", client_id_, e.what());
          }
        }
      } else if (auto* ack = std::get_if<Puback>(&*p)) {
        std::lock_guard lock(mu_);
        acks_.emplace(ack->packet_id, *p);
        cv_.notify_all();
      } else if (auto* sack = std::get_if<Suback>(&*p)) {
        std::lock_guard lock(mu_);
        acks_.emplace(sack->packet_id, *p);
        cv_.notify_all();
      }
    }
  } catch (const CodecError& e) {
    reason = std::string("malformed packet from broker: ") + e.what();
  }
  fail_all(reason);
}

}  // namespace hetbridge::mqtt
