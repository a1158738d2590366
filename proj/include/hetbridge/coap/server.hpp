#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "hetbridge/coap/codec.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::coap {

/// What a resource handler returns; dispatch wraps it into a full message.
struct Response {
  Code code = codes::content;
  std::string payload;
  std::optional<std::uint32_t> content_format;
};

using Handler = std::function<Response(const Message& request)>;
/// Uri-Path (segments joined by "/") -> handler.
using ResourceMap = std::map<std::string, Handler>;

/// Routes one request. CON requests get a piggybacked ACK with the request's
/// message id and token; NON requests get a NON with `fresh_mid` and the same
/// token. Unknown paths answer 4.04.
Message coap_server_dispatch(const Message& request, const ResourceMap& resources, std::uint16_t fresh_mid);

/// Remembers responses per (source endpoint, message id) so a retransmitted
/// request is answered from cache instead of re-running its handler.
class Deduplicator {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Deduplicator(std::chrono::seconds window = std::chrono::seconds(60), std::size_t capacity = 4096)
      : window_(window), capacity_(capacity) {}

  std::optional<Message> lookup(const net::Endpoint& from, std::uint16_t mid, Clock::time_point now);
  void remember(const net::Endpoint& from, std::uint16_t mid, Message response, Clock::time_point now);
  std::size_t size() const { return entries_.size(); }

 private:
  using Key = std::pair<net::Endpoint, std::uint16_t>;
  struct Entry {
    Message response;
    Clock::time_point stored_at;
  };

  void expire(Clock::time_point now);

  std::chrono::seconds window_;
  std::size_t capacity_;
  std::map<Key, Entry> entries_;
  std::deque<std::pair<Key, Clock::time_point>> order_;
};

struct ServerOptions {
  std::chrono::seconds dedup_window{60};
  std::size_t dedup_capacity = 4096;
};

/// One UDP socket and one receive loop.
class Server {
 public:
  Server(const net::Endpoint& bind, ResourceMap resources, ServerOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  std::uint16_t port() const noexcept { return sock_.port(); }
  std::uint64_t requests_handled() const noexcept { return handled_; }

 private:
  void loop();
  void handle(const net::Datagram& d);

  net::UdpSocket sock_;
  ResourceMap resources_;
  Deduplicator dedup_;
  std::atomic<bool> running_{false};
  std::thread thread_;
  std::uint16_t next_mid_;
  std::atomic<std::uint64_t> handled_{0};
};

}  // namespace hetbridge::coap
