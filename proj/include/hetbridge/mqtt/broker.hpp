#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "hetbridge/mqtt/codec.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::mqtt {

/// Identifies one network connection for the lifetime of the broker.
using SessionId = std::uint64_t;

struct BrokerState {
  /// client_id -> live session. A client id has at most one live session.
  std::map<std::string, SessionId> sessions;
  /// topic filter -> subscribed client ids.
  std::map<std::string, std::set<std::string>> subscriptions;

  bool operator==(const BrokerState&) const = default;
};

/// What the connection knows about itself.
struct SessionContext {
  SessionId id = 0;
  /// Set once CONNECT has been accepted on this connection.
  std::optional<std::string> client_id;
};

struct Outbound {
  SessionId session = 0;
  std::string client_id;
  Packet packet;
};

struct StepResult {
  std::vector<Outbound> outbound;
  /// Older sessions evicted by a duplicate CONNECT.
  std::vector<SessionId> evicted;
  /// Client id bound to the sender by an accepted CONNECT.
  std::optional<std::string> bound_client_id;
  /// Nonempty when the sender broke the protocol; its connection must close.
  std::string violation;
  /// Sender asked to close (DISCONNECT) or was refused.
  bool close_sender = false;
};

/// Broker transition. Mutates `state` in place and returns the packets to send.
///
/// CONNECT -> CONNACK(0); SUBSCRIBE -> SUBACK granting qos 0; PUBLISH -> one qos-0
/// copy per session with a matching filter, plus PUBACK to the sender for qos 1;
/// PINGREQ -> PINGRESP; DISCONNECT removes the session. qos-2 PUBLISH and any
/// packet before CONNECT are protocol violations.
StepResult broker_step(BrokerState& state, const SessionContext& session, const Packet& packet);

/// Connection closed without DISCONNECT. Removes the session if it is still live.
void broker_drop(BrokerState& state, const SessionContext& session);

/// TCP front end around broker_step: one reader thread per connection.
class BrokerServer {
 public:
  explicit BrokerServer(const net::Endpoint& bind);
  ~BrokerServer();
  BrokerServer(const BrokerServer&) = delete;
  BrokerServer& operator=(const BrokerServer&) = delete;

  void start();
  void stop();
  std::uint16_t port() const noexcept { return listener_.port(); }

  BrokerState snapshot() const;
  std::uint64_t publishes_received() const noexcept { return publishes_received_; }

 private:
  struct Connection;

  void accept_loop();
  void serve(const std::shared_ptr<Connection>& conn);
  void reap_finished();

  net::TcpListener listener_;
  std::atomic<bool> running_{false};
  std::thread acceptor_;

  mutable std::mutex state_mu_;
  BrokerState state_;

  std::mutex conns_mu_;
  std::map<SessionId, std::shared_ptr<Connection>> conns_;
  SessionId next_session_ = 1;

  std::atomic<std::uint64_t> publishes_received_{0};
};

/// Reads exactly one packet from a stream socket. Returns nullopt on EOF.
/// Throws CodecError for malformed input.
std::optional<Packet> read_packet(const net::Socket& sock);

}  // namespace hetbridge::mqtt
