// Copyright 2026 The podfed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace podfed::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  [[nodiscard]] std::string str() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
};

/// Parses "host:port".
[[nodiscard]] Endpoint parse_endpoint(std::string_view text);

/// Move-only owner of a file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }

  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.release();
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  [[nodiscard]] int fd() const noexcept { return fd_; }
  [[nodiscard]] bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }

  void close() noexcept;
  /// Wakes any thread blocked in accept/recv on this descriptor.
  void shutdown_both() const noexcept;
  void shutdown_write() const noexcept;

 private:
  int fd_ = -1;
};

/// Binds and listens. Throws Error{port_in_use} when the port is taken.
[[nodiscard]] Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog = 64);
[[nodiscard]] std::uint16_t local_port(const Socket& s);
[[nodiscard]] Socket connect_tcp(const Endpoint& ep,
                                 std::chrono::milliseconds timeout = std::chrono::milliseconds{2000});

/// Returns nullopt once the listener has been shut down.
[[nodiscard]] std::optional<Socket> accept(const Socket& listener);

/// Throws Error{io} on failure (including a peer reset).
void write_all(const Socket& s, std::string_view bytes);
/// Returns 0 on orderly EOF or error.
[[nodiscard]] std::size_t read_some(const Socket& s, std::span<char> buf);
/// False if EOF arrives before the buffer is filled.
[[nodiscard]] bool read_exact(const Socket& s, std::span<char> buf);
/// Reads until EOF.
[[nodiscard]] std::string read_to_eof(const Socket& s);
/// Reads one '\n'-terminated line (without the terminator); nullopt on EOF.
[[nodiscard]] std::optional<std::string> read_line(const Socket& s, std::string& carry);

void set_recv_timeout(const Socket& s, std::chrono::milliseconds timeout);

/// True when nothing is bound to the port on `host`.
[[nodiscard]] bool port_bindable(const std::string& host, std::uint16_t port);

/// Relays bytes between two connected sockets in both directions until
/// both halves reach EOF, propagating half-closes.
void relay_bidirectional(const Socket& a, const Socket& b);

}  // namespace podfed::net
