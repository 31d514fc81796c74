// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "socketrain/wire.hpp"

namespace socketrain {

/// Split "host:port"; throws std::invalid_argument on anything else.
std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr);

/// Bind-and-release an ephemeral loopback port. Callers use this to pick
/// rendezvous ports for tests and local launches.
std::uint16_t pick_free_port();

/// Blocking TCP connection with poll-based timeouts. Move-only RAII over the
/// file descriptor; TCP_NODELAY is set (the protocol is small framed
/// messages), sends use MSG_NOSIGNAL.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd);
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  /// Connect to host:port, retrying refused connections until the deadline
  /// (the peer's listener may come up slightly later).
  static Socket connect_to(const std::string& host, std::uint16_t port, int timeout_ms);

  bool valid() const { return fd_ >= 0; }
  void close();

  void send_all(const void* data, std::size_t size);
  void recv_all(void* data, std::size_t size, int timeout_ms);

  void send_frame(const WireFrame& frame);
  WireFrame recv_frame(int timeout_ms);

  /// Peer IPv4 address in dotted form.
  std::string peer_ip() const;

 private:
  int fd_ = -1;
};

class Listener {
 public:
  Listener() = default;
  ~Listener();
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  /// Bind and listen on host:port; port 0 binds an ephemeral port.
  static Listener bind_to(const std::string& host, std::uint16_t port);

  std::uint16_t port() const { return port_; }
  bool valid() const { return fd_ >= 0; }
  void close();

  /// Throws std::runtime_error on timeout.
  Socket accept(int timeout_ms);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace socketrain
