#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hetbridge/mqtt/codec.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::mqtt {

class ClientError : public std::runtime_error {
 public:
  enum class Kind { connection_refused, ack_timeout, broken_connection, subscribe_rejected };
  ClientError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct ClientOptions {
  std::chrono::milliseconds connect_timeout{2000};
  /// Wait for CONNACK, SUBACK and qos-1 PUBACK.
  std::chrono::milliseconds ack_timeout{5000};
};

using MessageHandler = std::function<void(const std::string& topic, const std::string& payload)>;
using ErrorHandler = std::function<void(const std::string& reason)>;

/// Clean-session MQTT 3.1.1 client.
///
/// The constructor performs the CONNECT/CONNACK handshake. A background reader
/// thread dispatches inbound PUBLISH packets to every subscription whose filter
/// matches, in arrival order. Handlers run on that thread; they may call
/// publish() at qos 0 but must not block on a qos-1 acknowledgement.
///
/// Single owner: publish/subscribe must not be driven from two threads at once.
class Client {
 public:
  Client(const net::Endpoint& broker, std::string client_id, ClientOptions options = {});
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  /// qos 0 returns once the bytes are written; qos 1 waits for the matching PUBACK.
  void publish(std::string_view topic, std::string_view payload, int qos = 0);

  /// Throws InvalidFilter before touching the network for bad filters.
  void subscribe(std::string_view filter, MessageHandler on_message);

  /// Called once from the reader thread when the connection breaks unexpectedly.
  void on_error(ErrorHandler handler);

  void disconnect();
  bool connected() const;
  const std::string& client_id() const noexcept { return client_id_; }

 private:
  void reader_loop();
  std::uint16_t next_packet_id();
  void send(const Packet& p);
  /// Blocks until an ack for `packet_id` arrives; returns the ack packet.
  Packet await_ack(std::uint16_t packet_id, const char* what);
  void fail_all(const std::string& reason);

  std::string client_id_;
  ClientOptions options_;
  net::Socket sock_;
  std::thread reader_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool connected_ = false;
  bool closing_ = false;
  std::string broken_reason_;
  std::map<std::uint16_t, Packet> acks_;
  std::vector<std::pair<std::string, MessageHandler>> subscriptions_;
  ErrorHandler on_error_;

  std::mutex write_mu_;
  std::uint16_t last_packet_id_ = 0;
};

}  // namespace hetbridge::mqtt
