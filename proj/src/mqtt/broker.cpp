#include "hetbridge/mqtt/broker.hpp"

#include <algorithm>

#include "hetbridge/core/log.hpp"
#include "hetbridge/mqtt/topic.hpp"

namespace hetbridge::mqtt {

namespace {

void remove_client(BrokerState& state, const std::string& client_id) {
  state.sessions.erase(client_id);
  for (auto it = state.subscriptions.begin(); it != state.subscriptions.end();) {
    it->second.erase(client_id);
    it = it->second.empty() ? state.subscriptions.erase(it) : std::next(it);
  }
}

StepResult violation(std::string why) {
  StepResult r;
  r.violation = std::move(why);
  r.close_sender = true;
  return r;
}

StepResult on_connect(BrokerState& state, const SessionContext& session, const Connect& c) {
  if (session.client_id) return violation("second CONNECT on one connection");
  StepResult r;
  if (c.protocol_level != 4) {
    r.outbound.push_back({session.id, c.client_id, Connack{false, 0x01}});
    r.close_sender = true;
    return r;
  }
  const std::string client_id = c.client_id.empty() ? "auto-" + std::to_string(session.id) : c.client_id;
  if (auto it = state.sessions.find(client_id); it != state.sessions.end()) {
    r.evicted.push_back(it->second);
    remove_client(state, client_id);
  }
  state.sessions[client_id] = session.id;
  r.bound_client_id = client_id;
  r.outbound.push_back({session.id, client_id, Connack{false, 0}});
  return r;
}

StepResult on_subscribe(BrokerState& state, const SessionContext& session, const Subscribe& s) {
  StepResult r;
  Suback ack;
  ack.packet_id = s.packet_id;
  for (const auto& t : s.topics) {
    if (!is_valid_filter(t.filter)) {
      ack.return_codes.push_back(kSubackFailure);
      continue;
    }
    state.subscriptions[t.filter].insert(*session.client_id);
    ack.return_codes.push_back(0);  // egress ceiling is qos 0
  }
  r.outbound.push_back({session.id, *session.client_id, std::move(ack)});
  return r;
}

StepResult on_publish(const BrokerState& state, const SessionContext& session, const Publish& p) {
  if (p.qos > 1) return violation("qos 2 is not supported");
  if (!is_valid_topic(p.topic)) return violation("PUBLISH topic contains wildcards");

  StepResult r;
  std::set<std::string> targets;
  for (const auto& [filter, clients] : state.subscriptions) {
    if (topic_matches(filter, p.topic)) targets.insert(clients.begin(), clients.end());
  }
  for (const auto& client : targets) {
    auto it = state.sessions.find(client);
    if (it == state.sessions.end()) continue;
    Publish copy;
    copy.topic = p.topic;
    copy.payload = p.payload;
    r.outbound.push_back({it->second, client, std::move(copy)});
  }
  if (p.qos == 1) r.outbound.push_back({session.id, *session.client_id, Puback{*p.packet_id}});
  return r;
}

}  // namespace

StepResult broker_step(BrokerState& state, const SessionContext& session, const Packet& packet) {
  if (const auto* c = std::get_if<Connect>(&packet)) return on_connect(state, session, *c);
  if (!session.client_id) return violation("first packet was not CONNECT");

  switch (packet_type(packet)) {
    case PacketType::subscribe:
      return on_subscribe(state, session, std::get<Subscribe>(packet));
    case PacketType::publish:
      return on_publish(state, session, std::get<Publish>(packet));
    case PacketType::pingreq: {
      StepResult r;
      r.outbound.push_back({session.id, *session.client_id, Pingresp{}});
      return r;
    }
    case PacketType::disconnect: {
      broker_drop(state, session);
      StepResult r;
      r.close_sender = true;
      return r;
    }
    case PacketType::puback:
      // No qos-1 deliveries are ever sent, so there is nothing to acknowledge.
      return {};
    default:
      return violation(std::string("unexpected ") + packet_name(packet_type(packet)) + " from client");
  }
}

void broker_drop(BrokerState& state, const SessionContext& session) {
  if (!session.client_id) return;
  auto it = state.sessions.find(*session.client_id);
  if (it != state.sessions.end() && it->second == session.id) remove_client(state, *session.client_id);
}

std::optional<Packet> read_packet(const net::Socket& sock) {
  Bytes buf(1);
  if (!net::read_exact(sock, buf)) return std::nullopt;
  // Fixed header byte plus up to four length bytes.
  for (;;) {
    std::uint8_t b = 0;
    if (!net::read_exact(sock, std::span(&b, 1))) return std::nullopt;
    buf.push_back(b);
    if ((b & 0x80) == 0) break;
    if (buf.size() == 5) throw CodecError(CodecError::Kind::overlong, "remaining length longer than 4 bytes");
  }
  const LengthPrefix len = decode_remaining_length(std::span(buf).subspan(1));
  const std::size_t header = buf.size();
  buf.resize(header + len.value);
  if (len.value > 0 && !net::read_exact(sock, std::span(buf).subspan(header))) return std::nullopt;
  return decode_packet(buf).packet;
}

struct BrokerServer::Connection {
  SessionId id = 0;
  net::Socket sock;
  std::mutex write_mu;
  std::thread thread;
  std::atomic<bool> done{false};

  void send(const Packet& p) {
    const Bytes bytes = encode_packet(p);
    std::lock_guard lock(write_mu);
    net::write_all(sock, bytes);
  }
};

BrokerServer::BrokerServer(const net::Endpoint& bind) : listener_(bind) {}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::start() {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
  log::info("mqtt broker listening on port {}", port());
}

void BrokerServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();

  std::map<SessionId, std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& [_, c] : conns) c->sock.shutdown();
  for (auto& [_, c] : conns) {
    if (c->thread.joinable()) c->thread.join();
  }
}

BrokerState BrokerServer::snapshot() const {
  std::lock_guard lock(state_mu_);
  return state_;
}

void BrokerServer::accept_loop() {
  while (running_) {
    auto sock = listener_.accept(std::chrono::milliseconds(100));
    reap_finished();
    if (!sock) continue;
    auto conn = std::make_shared<Connection>();
    conn->sock = std::move(*sock);
    {
      std::lock_guard lock(conns_mu_);
      conn->id = next_session_++;
      conns_[conn->id] = conn;
    }
    conn->thread = std::thread([this, conn] { serve(conn); });
  }
}

void BrokerServer::reap_finished() {
  std::vector<std::shared_ptr<Connection>> finished;
  {
    std::lock_guard lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if (it->second->done) {
        finished.push_back(it->second);
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    if (c->thread.joinable()) c->thread.join();
  }
}

void BrokerServer::serve(const std::shared_ptr<Connection>& conn) {
  SessionContext ctx{conn->id, std::nullopt};
  try {
    while (running_) {
      std::optional<Packet> packet = read_packet(conn->sock);
      if (!packet) break;
      if (std::holds_alternative<Publish>(*packet)) ++publishes_received_;

      StepResult result;
      {
        std::lock_guard lock(state_mu_);
        result = broker_step(state_, ctx, *packet);
      }
      if (result.bound_client_id) ctx.client_id = result.bound_client_id;

      std::vector<std::pair<std::shared_ptr<Connection>, const Packet*>> sends;
      std::vector<std::shared_ptr<Connection>> evicted;
      {
        std::lock_guard lock(conns_mu_);
        for (const auto& out : result.outbound) {
          if (out.session == conn->id) {
            sends.emplace_back(conn, &out.packet);
          } else if (auto it = conns_.find(out.session); it != conns_.end()) {
            sends.emplace_back(it->second, &out.packet);
          }
        }
        for (SessionId id : result.evicted) {
          if (auto it = conns_.find(id); it != conns_.end()) evicted.push_back(it->second);
        }
      }
      for (auto& c : evicted) c->sock.shutdown();
      for (auto& [target, p] : sends) {
        try {
          target->send(*p);
        } catch (const net::NetError&) {
          // Dead subscriber; its own reader thread cleans up.
        }
      }
      if (!result.violation.empty()) {
        log::warn("mqtt session {} closed: {}", conn->id, result.violation);
      }
      if (result.close_sender) break;
    }
  } catch (const CodecError& e) {
    log::warn("mqtt session {} sent a malformed packet: {}", conn->id, e.what());
  }
  {
    std::lock_guard lock(state_mu_);
    broker_drop(state_, ctx);
  }
  conn->sock.shutdown();
  conn->done = true;
}

}  // namespace hetbridge::mqtt
