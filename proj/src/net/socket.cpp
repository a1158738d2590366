#include "hetbridge/net/socket.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace hetbridge::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw NetError(NetError::Kind::resolve, "cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

Endpoint to_endpoint(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return {buf, ntohs(addr.sin_port)};
}

std::uint16_t local_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool wait_readable(int fd, std::chrono::milliseconds timeout) {
  pollfd p{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

Socket tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(NetError::Kind::io, errno_text("socket"));

  const int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno != EINPROGRESS) {
    throw NetError(NetError::Kind::refused, errno_text(("connect " + ep.to_string()).c_str()));
  }
  if (rc < 0) {
    pollfd p{s.fd(), POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc == 0) throw NetError(NetError::Kind::timeout, "connect " + ep.to_string() + ": timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw NetError(NetError::Kind::refused, "connect " + ep.to_string() + ": " + std::strerror(err));
    }
  }
  ::fcntl(s.fd(), F_SETFL, flags);
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

void write_all(const Socket& s, std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(s.fd(), bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(NetError::Kind::io, errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool read_exact(const Socket& s, std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const ssize_t n = ::recv(s.fd(), out.data() + off, out.size() - off, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

TcpListener::TcpListener(const Endpoint& bind) {
  const sockaddr_in addr = resolve(bind);
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) throw NetError(NetError::Kind::io, errno_text("socket"));
  const int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    throw NetError(NetError::Kind::io, errno_text(("bind " + bind.to_string()).c_str()));
  }
  if (::listen(sock_.fd(), 128) < 0) throw NetError(NetError::Kind::io, errno_text("listen"));
  port_ = local_port(sock_.fd());
}

std::optional<Socket> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (!sock_.valid() || !wait_readable(sock_.fd(), timeout)) return std::nullopt;
  const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

UdpSocket::UdpSocket(const Endpoint& bind) {
  const sockaddr_in addr = resolve(bind);
  sock_ = Socket(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) throw NetError(NetError::Kind::io, errno_text("socket"));
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    throw NetError(NetError::Kind::io, errno_text(("bind " + bind.to_string()).c_str()));
  }
  port_ = local_port(sock_.fd());
}

void UdpSocket::send_to(const Endpoint& to, std::span<const std::uint8_t> bytes) const {
  const sockaddr_in addr = resolve(to);
  const ssize_t n = ::sendto(sock_.fd(), bytes.data(), bytes.size(), 0,
                             reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (n < 0) throw NetError(NetError::Kind::io, errno_text("sendto"));
}

std::optional<Datagram> UdpSocket::receive(std::chrono::milliseconds timeout) const {
  if (!sock_.valid() || !wait_readable(sock_.fd(), timeout)) return std::nullopt;
  Datagram d;
  d.bytes.resize(65536);
  sockaddr_in from{};
  socklen_t len = sizeof from;
  const ssize_t n =
      ::recvfrom(sock_.fd(), d.bytes.data(), d.bytes.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
  // ICMP port-unreachable from an earlier send surfaces here as ECONNREFUSED; skip it.
  if (n < 0) return std::nullopt;
  d.bytes.resize(static_cast<std::size_t>(n));
  d.from = to_endpoint(from);
  return d;
}

}  // namespace hetbridge::net
