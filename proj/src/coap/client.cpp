#include "hetbridge/coap/client.hpp"

#include <random>

namespace hetbridge::coap {

namespace {

std::mt19937& rng() {
  thread_local std::mt19937 gen{std::random_device{}()};
  return gen;
}

using SteadyClock = std::chrono::steady_clock;

std::chrono::milliseconds remaining(SteadyClock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - SteadyClock::now());
  return left.count() > 0 ? left : std::chrono::milliseconds(0);
}

void send_empty_ack(const net::UdpSocket& sock, const net::Endpoint& to, std::uint16_t mid) {
  Message ack;
  ack.type = MessageType::ack;
  ack.message_id = mid;
  sock.send_to(to, encode_coap(ack));
}

enum class Match { none, response, empty_ack, reset };

Match classify(const Message& req, const Message& in) {
  if (in.type == MessageType::rst && in.message_id == req.message_id) return Match::reset;
  if (in.type == MessageType::ack && in.message_id == req.message_id && in.code.is_empty()) {
    return Match::empty_ack;
  }
  if (in.token != req.token || in.code.is_request() || in.code.is_empty()) return Match::none;
  // Piggybacked responses must also echo the message id.
  if (in.type == MessageType::ack && in.message_id != req.message_id) return Match::none;
  return Match::response;
}

// Waits for the token-matched response until `deadline`. Returns nullopt on timeout.
std::optional<Message> wait_response(const net::UdpSocket& sock, const net::Endpoint& server, const Message& req,
                                     SteadyClock::time_point deadline, bool& got_empty_ack) {
  for (;;) {
    const auto left = remaining(deadline);
    if (left.count() == 0) return std::nullopt;
    auto d = sock.receive(left);
    if (!d) continue;
    Message in;
    try {
      in = decode_coap(d->bytes);
    } catch (const CodecError&) {
      continue;
    }
    switch (classify(req, in)) {
      case Match::reset:
        throw RequestError(RequestError::Kind::reset, "server reset message " + std::to_string(req.message_id));
      case Match::empty_ack:
        got_empty_ack = true;
        return std::nullopt;
      case Match::response:
        if (in.type == MessageType::con) send_empty_ack(sock, server, in.message_id);
        return in;
      case Match::none:
        break;
    }
  }
}

}  // namespace

std::uint16_t random_message_id() { return static_cast<std::uint16_t>(rng()()); }

Bytes random_token(std::size_t length) {
  Bytes t(length);
  for (auto& b : t) b = static_cast<std::uint8_t>(rng()());
  return t;
}

Message coap_request(const net::UdpSocket& sock, const net::Endpoint& server, Message request, bool confirmable,
                     const RequestOptions& options) {
  if (!request.code.is_request()) throw std::invalid_argument("coap_request needs a request code (class 0)");
  request.type = confirmable ? MessageType::con : MessageType::non;
  if (request.message_id == 0) request.message_id = random_message_id();
  if (request.token.empty()) request.token = random_token();
  const Bytes wire = encode_coap(request);

  if (!confirmable) {
    sock.send_to(server, wire);
    bool ignored = false;
    auto deadline = SteadyClock::now() + options.response_timeout;
    for (;;) {
      if (auto r = wait_response(sock, server, request, deadline, ignored)) return *r;
      if (remaining(deadline).count() == 0) break;
    }
    throw RequestError(RequestError::Kind::timeout, "no response to NON request from " + server.to_string());
  }

  auto timeout = options.ack_timeout;
  for (int attempt = 0; attempt <= options.max_retransmit; ++attempt) {
    sock.send_to(server, wire);
    bool got_empty_ack = false;
    if (auto r = wait_response(sock, server, request, SteadyClock::now() + timeout, got_empty_ack)) return *r;
    if (got_empty_ack) {
      // Separate response: stop retransmitting and wait for the CON carrying it.
      const auto deadline = SteadyClock::now() + options.response_timeout;
      for (;;) {
        bool again = false;
        if (auto r = wait_response(sock, server, request, deadline, again)) return *r;
        if (remaining(deadline).count() == 0) break;
      }
      throw RequestError(RequestError::Kind::timeout, "separate response never arrived from " + server.to_string());
    }
    timeout *= 2;
  }
  throw RequestError(RequestError::Kind::timeout,
                     "no ACK from " + server.to_string() + " after " + std::to_string(options.max_retransmit) +
                         " retransmissions");
}

Message coap_request(const net::Endpoint& server, Message request, bool confirmable, const RequestOptions& options) {
  net::UdpSocket sock;
  return coap_request(sock, server, std::move(request), confirmable, options);
}

bool coap_ping(const net::Endpoint& server, std::chrono::milliseconds timeout) {
  net::UdpSocket sock;
  Message ping;
  ping.type = MessageType::con;
  ping.message_id = random_message_id();
  sock.send_to(server, encode_coap(ping));
  const auto deadline = SteadyClock::now() + timeout;
  for (;;) {
    const auto left = remaining(deadline);
    if (left.count() == 0) return false;
    auto d = sock.receive(left);
    if (!d) continue;
    try {
      const Message in = decode_coap(d->bytes);
      if (in.type == MessageType::rst && in.message_id == ping.message_id) return true;
    } catch (const CodecError&) {
    }
  }
}

}  // namespace hetbridge::coap
