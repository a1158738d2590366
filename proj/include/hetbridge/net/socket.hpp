#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetbridge::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  auto operator<=>(const Endpoint&) const = default;
};

class NetError : public std::runtime_error {
 public:
  enum class Kind { refused, timeout, io, resolve };
  NetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Owning file descriptor, move-only.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  /// Wakes any thread blocked in a read on this socket.
  void shutdown() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

Socket tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::seconds(2));

/// Writes every byte or throws NetError(io).
void write_all(const Socket& s, std::span<const std::uint8_t> bytes);
/// Reads exactly `out.size()` bytes. Returns false on orderly EOF or error.
bool read_exact(const Socket& s, std::span<std::uint8_t> out);

/// Waits until `fd` is readable. Returns false on timeout.
bool wait_readable(int fd, std::chrono::milliseconds timeout);

class TcpListener {
 public:
  /// Port 0 binds an ephemeral port; see port().
  explicit TcpListener(const Endpoint& bind);
  std::uint16_t port() const noexcept { return port_; }
  /// Returns nullopt when nothing arrived within `timeout`.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() noexcept { sock_.close(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

struct Datagram {
  std::vector<std::uint8_t> bytes;
  Endpoint from;
};

class UdpSocket {
 public:
  /// Binds to `bind`; port 0 is ephemeral.
  explicit UdpSocket(const Endpoint& bind = {"127.0.0.1", 0});
  std::uint16_t port() const noexcept { return port_; }
  void send_to(const Endpoint& to, std::span<const std::uint8_t> bytes) const;
  std::optional<Datagram> receive(std::chrono::milliseconds timeout) const;
  void close() noexcept { sock_.close(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace hetbridge::net
