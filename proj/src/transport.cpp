// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "socketrain/bytes.hpp"

namespace socketrain {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return static_cast<int>(std::max<std::int64_t>(0, left.count()));
}

// Wait for an event on fd; throws on timeout or poll error.
void wait_for(int fd, short events, Clock::time_point deadline, const char* what) {
  for (;;) {
    pollfd pfd{fd, events, 0};
    const int timeout = remaining_ms(deadline);
    const int rc = ::poll(&pfd, 1, timeout == 0 ? 0 : timeout);
    if (rc > 0) return;
    if (rc == 0) throw std::runtime_error(std::string(what) + ": timed out");
    if (errno != EINTR) throw_errno(std::string(what) + ": poll");
  }
}

sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &result);
  if (rc != 0 || result == nullptr) {
    throw std::invalid_argument("transport: cannot resolve host '" + host +
                                "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(result->ai_addr);
  addr.sin_port = htons(port);
  ::freeaddrinfo(result);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw std::invalid_argument("transport: expected host:port, got '" + addr + "'");
  }
  const std::string host = addr.substr(0, colon);
  const std::string port_str = addr.substr(colon + 1);
  std::size_t pos = 0;
  int port = 0;
  try {
    port = std::stoi(port_str, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("transport: bad port in '" + addr + "'");
  }
  if (pos != port_str.size() || port < 1 || port > 65535) {
    throw std::invalid_argument("transport: bad port in '" + addr + "'");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

std::uint16_t pick_free_port() {
  Listener probe = Listener::bind_to("127.0.0.1", 0);
  return probe.port();
}

Socket::Socket(int fd) : fd_(fd) { set_nodelay(fd_); }

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Socket Socket::connect_to(const std::string& host, std::uint16_t port, int timeout_ms) {
  const sockaddr_in addr = resolve_ipv4(host, port);
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("transport: socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      return Socket(fd);
    }
    const int saved = errno;
    ::close(fd);
    if ((saved == ECONNREFUSED || saved == ETIMEDOUT || saved == EAGAIN) &&
        Clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      continue;
    }
    errno = saved;
    throw_errno("transport: connect to " + host + ":" + std::to_string(port));
  }
}

void Socket::send_all(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (size > 0) {
    const ssize_t n = ::send(fd_, p, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("transport: send");
    }
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

void Socket::recv_all(void* data, std::size_t size, int timeout_ms) {
  auto* p = static_cast<std::uint8_t*>(data);
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  while (size > 0) {
    wait_for(fd_, POLLIN, deadline, "transport: recv");
    const ssize_t n = ::recv(fd_, p, size, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("transport: recv");
    }
    if (n == 0) throw std::runtime_error("transport: peer disconnected");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

void Socket::send_frame(const WireFrame& frame) {
  const std::vector<std::uint8_t> bytes = encode_frame(frame);
  send_all(bytes.data(), bytes.size());
}

WireFrame Socket::recv_frame(int timeout_ms) {
  std::uint8_t header[4];
  recv_all(header, 4, timeout_ms);
  ByteReader reader(header, 4);
  const std::uint32_t length = reader.u32le();
  if (length < 1 || length > (256u << 20)) {
    throw std::runtime_error("transport: bad frame length " + std::to_string(length));
  }
  std::vector<std::uint8_t> buffer;
  buffer.reserve(4 + length);
  buffer.insert(buffer.end(), header, header + 4);
  buffer.resize(4 + length);
  recv_all(buffer.data() + 4, length, timeout_ms);
  return decode_frame(buffer);
}

std::string Socket::peer_ip() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw_errno("transport: getpeername");
  }
  char buf[INET_ADDRSTRLEN];
  if (::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf)) == nullptr) {
    throw_errno("transport: inet_ntop");
  }
  return buf;
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
  other.port_ = 0;
}

Listener& Listener::operator=(Listener&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
    other.port_ = 0;
  }
  return *this;
}

void Listener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener Listener::bind_to(const std::string& host, std::uint16_t port) {
  const sockaddr_in want = resolve_ipv4(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("transport: socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&want), sizeof(want)) != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    throw_errno("transport: bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd, 64) != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    throw_errno("transport: listen");
  }
  sockaddr_in got{};
  socklen_t len = sizeof(got);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len) != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    throw_errno("transport: getsockname");
  }
  Listener listener;
  listener.fd_ = fd;
  listener.port_ = ntohs(got.sin_port);
  return listener;
}

Socket Listener::accept(int timeout_ms) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    wait_for(fd_, POLLIN, deadline, "transport: accept");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno != EINTR && errno != EAGAIN) throw_errno("transport: accept");
  }
}

}  // namespace socketrain
