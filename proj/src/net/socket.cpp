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

#include "podfed/net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "podfed/common/error.hpp"

namespace podfed::net {
namespace {

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = (host.empty() || host == "localhost") ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
      throw Error(Errc::invalid_argument, "cannot resolve host " + h);
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return addr;
}

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(Errc::invalid_argument, "endpoint must be host:port: " + std::string(text));
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  int port = 0;
  try {
    port = std::stoi(std::string(text.substr(colon + 1)));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) {
    throw Error(Errc::invalid_argument, "bad port in endpoint " + std::string(text));
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_both() const noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::shutdown_write() const noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(Errc::io, errno_text("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno == EADDRINUSE) {
      throw Error(Errc::port_in_use, "port " + std::to_string(port) + " already in use");
    }
    throw Error(Errc::io, errno_text("bind"));
  }
  if (::listen(s.fd(), backlog) != 0) throw Error(Errc::io, errno_text("listen"));
  return s;
}

std::uint16_t local_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw Error(Errc::io, errno_text("getsockname"));
  }
  return ntohs(addr.sin_port);
}

Socket connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(Errc::io, errno_text("socket"));
  sockaddr_in addr = resolve(ep.host, ep.port);

  int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    throw Error(Errc::io, "connect " + ep.str() + ": " + std::strerror(errno));
  }
  if (rc != 0) {
    pollfd pfd{s.fd(), POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc == 0) throw Error(Errc::timeout, "connect " + ep.str() + " timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc < 0 || err != 0) {
      throw Error(Errc::io, "connect " + ep.str() + ": " + std::strerror(err != 0 ? err : errno));
    }
  }
  ::fcntl(s.fd(), F_SETFL, flags);
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

std::optional<Socket> accept(const Socket& listener) {
  while (true) {
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return std::nullopt;
  }
}

void write_all(const Socket& s, std::string_view bytes) {
  while (!bytes.empty()) {
    ssize_t n = ::send(s.fd(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io, errno_text("send"));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::size_t read_some(const Socket& s, std::span<char> buf) {
  while (true) {
    ssize_t n = ::recv(s.fd(), buf.data(), buf.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    return 0;
  }
}

bool read_exact(const Socket& s, std::span<char> buf) {
  std::size_t got = 0;
  while (got < buf.size()) {
    std::size_t n = read_some(s, buf.subspan(got));
    if (n == 0) return false;
    got += n;
  }
  return true;
}

std::string read_to_eof(const Socket& s) {
  std::string out;
  char buf[4096];
  while (std::size_t n = read_some(s, buf)) out.append(buf, n);
  return out;
}

std::optional<std::string> read_line(const Socket& s, std::string& carry) {
  while (true) {
    auto nl = carry.find('\n');
    if (nl != std::string::npos) {
      std::string line = carry.substr(0, nl);
      carry.erase(0, nl + 1);
      return line;
    }
    char buf[1024];
    std::size_t n = read_some(s, buf);
    if (n == 0) return std::nullopt;
    carry.append(buf, n);
  }
}

void set_recv_timeout(const Socket& s, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

bool port_bindable(const std::string& host, std::uint16_t port) {
  try {
    Socket s = listen_tcp(host, port, 1);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void relay_bidirectional(const Socket& a, const Socket& b) {
  pollfd fds[2] = {{a.fd(), POLLIN, 0}, {b.fd(), POLLIN, 0}};
  bool open[2] = {true, true};
  char buf[16384];
  while (open[0] || open[1]) {
    for (int i = 0; i < 2; ++i) fds[i].events = open[i] ? POLLIN : 0;
    int rc = ::poll(fds, 2, -1);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (!open[i] || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      const Socket& from = i == 0 ? a : b;
      const Socket& to = i == 0 ? b : a;
      std::size_t n = read_some(from, buf);
      if (n == 0) {
        open[i] = false;
        to.shutdown_write();
        continue;
      }
      try {
        write_all(to, std::string_view(buf, n));
      } catch (const Error&) {
        return;
      }
    }
  }
}

}  // namespace podfed::net
