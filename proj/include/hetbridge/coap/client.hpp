#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

#include "hetbridge/coap/codec.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::coap {

class RequestError : public std::runtime_error {
 public:
  enum class Kind { timeout, reset };
  RequestError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct RequestOptions {
  /// First CON retransmission timeout; doubles after each retransmission.
  std::chrono::milliseconds ack_timeout{2000};
  int max_retransmit = 4;
  /// NON requests and separate responses wait this long.
  std::chrono::milliseconds response_timeout{2000};
};

/// Sends a request and waits for the token-matched response.
///
/// Message id and a 4-byte token are generated when the request leaves them
/// zero/empty. CON requests retransmit with binary exponential backoff until an
/// ACK arrives; an empty ACK switches to waiting for a separate response.
/// Throws RequestError(timeout) or RequestError(reset).
Message coap_request(const net::Endpoint& server, Message request, bool confirmable,
                     const RequestOptions& options = {});

/// Same exchange over a caller-owned socket (used by long-lived devices).
Message coap_request(const net::UdpSocket& sock, const net::Endpoint& server, Message request, bool confirmable,
                     const RequestOptions& options = {});

/// CoAP ping: an empty CON answered by RST. Returns false on timeout.
bool coap_ping(const net::Endpoint& server, std::chrono::milliseconds timeout = std::chrono::milliseconds(1000));

/// Random message id / token helpers (thread-safe).
std::uint16_t random_message_id();
Bytes random_token(std::size_t length = 4);

}  // namespace hetbridge::coap
