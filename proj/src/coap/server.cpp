#include "hetbridge/coap/server.hpp"

#include <random>

#include "hetbridge/core/log.hpp"

namespace hetbridge::coap {

Message coap_server_dispatch(const Message& request, const ResourceMap& resources, std::uint16_t fresh_mid) {
  Message reply;
  reply.token = request.token;
  if (request.type == MessageType::con) {
    reply.type = MessageType::ack;
    reply.message_id = request.message_id;
  } else {
    reply.type = MessageType::non;
    reply.message_id = fresh_mid;
  }

  auto it = resources.find(request.uri_path());
  if (it == resources.end()) {
    reply.code = codes::not_found;
    return reply;
  }
  Response r;
  try {
    r = it->second(request);
  } catch (const std::exception& e) {
    log::error("coap handler for /{} threw: {}", it->first, e.what());
    r = Response{codes::internal_error, {}, std::nullopt};
  }
  reply.code = r.code;
  reply.payload = std::move(r.payload);
  if (r.content_format) reply.add_option(Option::uint(options::content_format, *r.content_format));
  return reply;
}

void Deduplicator::expire(Clock::time_point now) {
  while (!order_.empty() && (order_.size() > capacity_ || now - order_.front().second > window_)) {
    auto it = entries_.find(order_.front().first);
    // A key can be re-remembered; only erase the entry this queue slot created.
    if (it != entries_.end() && it->second.stored_at == order_.front().second) entries_.erase(it);
    order_.pop_front();
  }
}

std::optional<Message> Deduplicator::lookup(const net::Endpoint& from, std::uint16_t mid, Clock::time_point now) {
  expire(now);
  auto it = entries_.find({from, mid});
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

void Deduplicator::remember(const net::Endpoint& from, std::uint16_t mid, Message response, Clock::time_point now) {
  Key key{from, mid};
  entries_[key] = Entry{std::move(response), now};
  order_.emplace_back(std::move(key), now);
  expire(now);
}

Server::Server(const net::Endpoint& bind, ResourceMap resources, ServerOptions options)
    : sock_(bind),
      resources_(std::move(resources)),
      dedup_(options.dedup_window, options.dedup_capacity),
      next_mid_(static_cast<std::uint16_t>(std::random_device{}())) {}

Server::~Server() { stop(); }

void Server::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { loop(); });
  log::info("coap server listening on udp port {}", port());
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
  sock_.close();
}

void Server::loop() {
  while (running_) {
    auto d = sock_.receive(std::chrono::milliseconds(100));
    if (!d) continue;
    try {
      handle(*d);
    } catch (const std::exception& e) {
      log::warn("coap: dropped datagram from {}: {}", d->from.to_string(), e.what());
    }
  }
}

void Server::handle(const net::Datagram& d) {
  Message req;
  try {
    req = decode_coap(d.bytes);
  } catch (const CodecError& e) {
    log::debug("coap: undecodable datagram from {}: {}", d.from.to_string(), e.what());
    return;
  }

  // Empty CON is a ping; answer with RST.
  if (req.code.is_empty()) {
    if (req.type == MessageType::con) {
      Message rst;
      rst.type = MessageType::rst;
      rst.message_id = req.message_id;
      sock_.send_to(d.from, encode_coap(rst));
    }
    return;
  }
  if (!req.code.is_request() || (req.type != MessageType::con && req.type != MessageType::non)) return;

  const auto now = Deduplicator::Clock::now();
  if (auto cached = dedup_.lookup(d.from, req.message_id, now)) {
    sock_.send_to(d.from, encode_coap(*cached));
    return;
  }
  Message reply = coap_server_dispatch(req, resources_, next_mid_++);
  ++handled_;
  dedup_.remember(d.from, req.message_id, reply, now);
  sock_.send_to(d.from, encode_coap(reply));
}

}  // namespace hetbridge::coap
