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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "podfed/common/clock.hpp"
#include "podfed/net/socket.hpp"
#include "podfed/ports/port_manager.hpp"

namespace podfed::tunnel {

struct TunnelRegistration {
  std::string pod_name;
  std::uint16_t remote_port = 0;  ///< gateway-side listener
  std::string target;             ///< pod-local "host:port" the pod relays to
  Instant established_at{};
  Instant last_keepalive_at{};
};

struct KeepalivePolicy {
  bool enabled = true;
  Duration interval = std::chrono::seconds{15};
  std::uint32_t max_missed = 3;

  void validate() const;
};

struct GatewayOptions {
  std::string bind_host = "127.0.0.1";
  std::uint16_t control_port = 0;  ///< 0 picks an ephemeral port
  KeepalivePolicy keepalive;
  /// Drops tunnels that carried no traffic for this long, the way an idle
  /// NAT/SSH session does. Unset means never.
  std::optional<Duration> idle_timeout;
};

enum class TunnelState { alive, expired };

struct WebBridge {
  std::uint16_t web_port = 0;
  std::uint16_t remote_port = 0;
  std::string session_id;

  bool operator==(const WebBridge&) const = default;
};

namespace detail {
struct Tunnel;
struct Bridge;
}  // namespace detail

/// Elastic-VM analog: terminates reverse tunnels from pods, exposes one TCP
/// listener per tunnel on the registered remote port, relays each accepted
/// connection over the tunnel as a channel, and keeps tunnels alive with
/// ping/pong frames. Web bridges listen on a session's web port and relay
/// through the tunnel's remote port on localhost.
class TunnelGateway final : public ports::ListenerProbe {
 public:
  using ExpiryHook = std::function<void(const TunnelRegistration&, const std::string& reason)>;
  using Authorizer = std::function<bool(const std::string& pod_name, std::uint16_t remote_port)>;

  TunnelGateway(const Clock& clock, GatewayOptions options = {});
  ~TunnelGateway() override;
  TunnelGateway(const TunnelGateway&) = delete;
  TunnelGateway& operator=(const TunnelGateway&) = delete;

  /// Where pods dial in to register.
  [[nodiscard]] net::Endpoint control_endpoint() const { return control_endpoint_; }
  [[nodiscard]] const GatewayOptions& options() const { return options_; }

  /// Rejects registrations for ports the port manager did not assign.
  void set_authorizer(Authorizer authorizer);
  void on_expired(ExpiryHook hook);

  [[nodiscard]] std::optional<TunnelRegistration> registration(std::uint16_t remote_port) const;
  [[nodiscard]] std::vector<TunnelRegistration> registrations() const;

  /// One keepalive period for one tunnel: counts a miss when the peer sent
  /// nothing since the previous tick, expires after max_missed consecutive
  /// misses (or on idle timeout), otherwise sends a ping unless data
  /// already proved liveness.
  TunnelState keepalive_tick(std::uint16_t remote_port, Instant now);
  /// keepalive_tick over every live tunnel; returns the expired ports.
  std::vector<std::uint16_t> tick_all(Instant now);
  /// Blocks (real time) until the tunnel's last_keepalive_at >= `at`.
  bool await_keepalive(std::uint16_t remote_port, Instant at,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds{2000});

  /// Tears the tunnel and any bridge riding on it down. Idempotent.
  void close_tunnel(std::uint16_t remote_port, const std::string& reason = "closed");

  /// Errors: tunnel_expired (no live tunnel on remote_port), port_in_use.
  /// Re-opening an identical bridge for the session returns the existing one.
  WebBridge open_web_bridge(const std::string& session_id, std::uint16_t web_port,
                            std::uint16_t remote_port);
  void close_web_bridge(const std::string& session_id);
  [[nodiscard]] std::optional<WebBridge> web_bridge(const std::string& session_id) const;
  [[nodiscard]] std::vector<WebBridge> web_bridges() const;

  // ports::ListenerProbe
  [[nodiscard]] bool listening(std::uint16_t port) const override;
  bool shut_down(std::uint16_t port) override;

  void stop();

 private:
  void control_loop();
  void handshake(net::Socket conn);
  std::shared_ptr<detail::Tunnel> take_tunnel(std::uint16_t remote_port);
  void expire(std::shared_ptr<detail::Tunnel> tunnel, const std::string& reason);

  const Clock& clock_;
  GatewayOptions options_;
  net::Socket control_listener_;
  net::Endpoint control_endpoint_;
  std::atomic<bool> stopping_{false};
  std::thread control_thread_;

  mutable std::mutex mu_;
  std::map<std::uint16_t, std::shared_ptr<detail::Tunnel>> tunnels_;
  std::map<std::string, std::shared_ptr<detail::Bridge>> bridges_;
  Authorizer authorizer_;
  ExpiryHook on_expired_;
};

/// Pod-side end of a reverse tunnel: dials the gateway, registers the remote
/// port and relays each channel the gateway opens to a local target.
class TunnelClient {
 public:
  /// Connects and completes registration. Errors: port_in_use / forbidden
  /// (rejected by the gateway), io, timeout.
  static std::unique_ptr<TunnelClient> open(const net::Endpoint& gateway,
                                            const std::string& pod_name,
                                            std::uint16_t remote_port,
                                            const net::Endpoint& target,
                                            std::chrono::milliseconds timeout =
                                                std::chrono::milliseconds{2000});
  ~TunnelClient();
  TunnelClient(const TunnelClient&) = delete;
  TunnelClient& operator=(const TunnelClient&) = delete;

  /// Drops the connection, as a crashed pod would.
  void close();
  /// A frozen peer keeps its socket open but stops answering pings.
  void set_frozen(bool frozen) { frozen_ = frozen; }
  [[nodiscard]] bool alive() const { return alive_; }
  [[nodiscard]] std::uint16_t remote_port() const { return remote_port_; }

 private:
  struct Channel;
  TunnelClient(net::Socket conn, std::uint16_t remote_port, net::Endpoint target);
  void reader_loop();
  void send(const std::string& frame);
  void reap(bool all);

  net::Socket conn_;
  std::uint16_t remote_port_;
  net::Endpoint target_;
  std::atomic<bool> frozen_{false};
  std::atomic<bool> alive_{true};
  std::mutex write_mu_;
  std::mutex ch_mu_;
  std::map<std::uint16_t, std::shared_ptr<Channel>> channels_;
  std::thread reader_;
};

}  // namespace podfed::tunnel
