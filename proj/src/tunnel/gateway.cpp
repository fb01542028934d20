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

#include "podfed/tunnel/gateway.hpp"

#include <algorithm>
#include <condition_variable>

#include <spdlog/spdlog.h>

#include "podfed/common/error.hpp"
#include "podfed/tunnel/frame.hpp"

namespace podfed::tunnel {
namespace detail {

struct Channel {
  std::uint16_t id = 0;
  net::Socket client;
  std::thread reader;
  std::atomic<bool> reader_done{false};
  std::atomic<bool> pod_eof{false};
};

struct Tunnel {
  Tunnel(const Clock& c, TunnelRegistration r, net::Socket pod, net::Socket lst)
      : clock(c), reg(std::move(r)), conn(std::move(pod)), listener(std::move(lst)) {
    last_traffic = reg.established_at;
  }
  ~Tunnel() { teardown(); }

  const Clock& clock;
  TunnelRegistration reg;  // guarded by ka_mu
  net::Socket conn;
  net::Socket listener;

  std::mutex write_mu;
  std::mutex ch_mu;
  std::map<std::uint16_t, std::shared_ptr<Channel>> channels;
  std::uint16_t next_channel = 1;
  std::thread reader;
  std::thread acceptor;
  std::atomic<bool> closed{false};
  std::atomic<bool> peer_gone{false};

  // Keepalive bookkeeping.
  std::mutex ka_mu;
  std::condition_variable ka_cv;
  std::atomic<bool> activity{true};
  std::atomic<bool> data_seen{false};
  std::uint32_t missed = 0;
  Instant last_traffic{};
  std::uint8_t ping_seq = 0;

  bool send(const std::string& frame) {
    std::lock_guard lock(write_mu);
    try {
      net::write_all(conn, frame);
      return true;
    } catch (const Error&) {
      peer_gone = true;
      return false;
    }
  }

  void on_inbound(bool is_data) {
    activity = true;
    if (is_data) data_seen = true;
    std::lock_guard lock(ka_mu);
    const Instant now = clock.now();
    reg.last_keepalive_at = std::max(reg.last_keepalive_at, now);
    last_traffic = std::max(last_traffic, now);
    ka_cv.notify_all();
  }

  void on_outbound() {
    std::lock_guard lock(ka_mu);
    last_traffic = std::max(last_traffic, clock.now());
  }

  std::shared_ptr<Channel> find(std::uint16_t id) {
    std::lock_guard lock(ch_mu);
    auto it = channels.find(id);
    return it == channels.end() ? nullptr : it->second;
  }

  void reader_loop() {
    while (auto f = read_frame(conn)) {
      switch (f->type) {
        case FrameType::ping:
          on_inbound(false);
          send(encode_frame(FrameType::pong, f->payload));
          break;
        case FrameType::pong:
          on_inbound(false);
          break;
        case FrameType::data: {
          on_inbound(true);
          auto ch = find(frame_channel(*f));
          if (!ch) break;
          try {
            net::write_all(ch->client, frame_data(*f));
          } catch (const Error&) {
            send(encode_frame(FrameType::close, channel_payload(ch->id)));
            ch->pod_eof = true;
            ch->client.shutdown_both();
          }
          break;
        }
        case FrameType::eof:
          on_inbound(false);
          if (auto ch = find(frame_channel(*f))) {
            ch->pod_eof = true;
            ch->client.shutdown_write();
          }
          break;
        case FrameType::close:
          on_inbound(false);
          if (auto ch = find(frame_channel(*f))) {
            ch->pod_eof = true;
            ch->client.shutdown_both();
          }
          break;
        default:
          break;
      }
    }
    peer_gone = true;
    std::lock_guard lock(ch_mu);
    for (auto& [id, ch] : channels) {
      ch->pod_eof = true;
      ch->client.shutdown_both();
    }
  }

  void channel_loop(const std::shared_ptr<Channel>& ch) {
    char buf[kMaxChunk];
    while (true) {
      std::size_t n = net::read_some(ch->client, buf);
      if (n == 0) break;
      on_outbound();
      if (!send(encode_frame(FrameType::data, channel_payload(ch->id, std::string_view(buf, n))))) {
        break;
      }
    }
    if (!closed && !peer_gone) send(encode_frame(FrameType::eof, channel_payload(ch->id)));
    ch->reader_done = true;
  }

  void reap_locked() {
    for (auto it = channels.begin(); it != channels.end();) {
      if (it->second->reader_done && it->second->pod_eof) {
        if (it->second->reader.joinable()) it->second->reader.join();
        it = channels.erase(it);
      } else {
        ++it;
      }
    }
  }

  void accept_loop() {
    while (!closed) {
      auto client = net::accept(listener);
      if (!client) break;
      if (closed || peer_gone) continue;  // drops the connection

      std::lock_guard lock(ch_mu);
      reap_locked();
      if (channels.size() >= 0xfffe) continue;
      while (next_channel == 0 || channels.count(next_channel)) ++next_channel;
      auto ch = std::make_shared<Channel>();
      ch->id = next_channel++;
      ch->client = std::move(*client);
      channels.emplace(ch->id, ch);
      if (!send(encode_frame(FrameType::open, channel_payload(ch->id)))) {
        channels.erase(ch->id);
        continue;
      }
      ch->reader = std::thread([this, ch] { channel_loop(ch); });
    }
  }

  void start() {
    reader = std::thread([this] { reader_loop(); });
    acceptor = std::thread([this] { accept_loop(); });
  }

  void teardown() {
    if (closed.exchange(true)) return;
    listener.shutdown_both();
    conn.shutdown_both();
    if (acceptor.joinable()) acceptor.join();
    if (reader.joinable()) reader.join();
    std::map<std::uint16_t, std::shared_ptr<Channel>> chans;
    {
      std::lock_guard lock(ch_mu);
      chans.swap(channels);
    }
    for (auto& [id, ch] : chans) ch->client.shutdown_both();
    for (auto& [id, ch] : chans) {
      if (ch->reader.joinable()) ch->reader.join();
    }
    listener.close();
    conn.close();
    ka_cv.notify_all();
  }
};

struct BridgeConn {
  net::Socket browser;
  net::Socket upstream;
  std::thread relay;
  std::atomic<bool> done{false};
};

struct Bridge {
  WebBridge info;
  std::string host;
  net::Socket listener;
  std::thread acceptor;
  std::mutex mu;
  std::vector<std::shared_ptr<BridgeConn>> conns;
  std::atomic<bool> closed{false};

  ~Bridge() { teardown(); }

  void accept_loop() {
    while (!closed) {
      auto browser = net::accept(listener);
      if (!browser) break;
      if (closed) break;
      net::Socket upstream;
      try {
        upstream = net::connect_tcp({host, info.remote_port});
      } catch (const Error& e) {
        spdlog::warn("web bridge {}: upstream {} unreachable: {}", info.session_id,
                     info.remote_port, e.what());
        continue;
      }
      auto c = std::make_shared<BridgeConn>();
      c->browser = std::move(*browser);
      c->upstream = std::move(upstream);
      std::lock_guard lock(mu);
      std::erase_if(conns, [](const std::shared_ptr<BridgeConn>& x) {
        if (!x->done) return false;
        if (x->relay.joinable()) x->relay.join();
        return true;
      });
      c->relay = std::thread([c] {
        net::relay_bidirectional(c->browser, c->upstream);
        c->done = true;
      });
      conns.push_back(c);
    }
  }

  void teardown() {
    if (closed.exchange(true)) return;
    listener.shutdown_both();
    if (acceptor.joinable()) acceptor.join();
    std::lock_guard lock(mu);
    for (auto& c : conns) {
      c->browser.shutdown_both();
      c->upstream.shutdown_both();
    }
    for (auto& c : conns) {
      if (c->relay.joinable()) c->relay.join();
    }
    conns.clear();
    listener.close();
  }
};

}  // namespace detail

void KeepalivePolicy::validate() const {
  if (interval.count() <= 0) throw Error(Errc::invalid_argument, "keepalive interval must be > 0");
  if (max_missed < 1) throw Error(Errc::invalid_argument, "keepalive max_missed must be >= 1");
}

TunnelGateway::TunnelGateway(const Clock& clock, GatewayOptions options)
    : clock_(clock), options_(std::move(options)) {
  options_.keepalive.validate();
  control_listener_ = net::listen_tcp(options_.bind_host, options_.control_port);
  control_endpoint_ = {options_.bind_host, net::local_port(control_listener_)};
  control_thread_ = std::thread([this] { control_loop(); });
}

TunnelGateway::~TunnelGateway() { stop(); }

void TunnelGateway::stop() {
  if (stopping_.exchange(true)) return;
  control_listener_.shutdown_both();
  if (control_thread_.joinable()) control_thread_.join();
  control_listener_.close();
  std::map<std::uint16_t, std::shared_ptr<detail::Tunnel>> tunnels;
  std::map<std::string, std::shared_ptr<detail::Bridge>> bridges;
  {
    std::lock_guard lock(mu_);
    tunnels.swap(tunnels_);
    bridges.swap(bridges_);
  }
  for (auto& [s, b] : bridges) b->teardown();
  for (auto& [p, t] : tunnels) t->teardown();
}

void TunnelGateway::set_authorizer(Authorizer authorizer) {
  std::lock_guard lock(mu_);
  authorizer_ = std::move(authorizer);
}

void TunnelGateway::on_expired(ExpiryHook hook) {
  std::lock_guard lock(mu_);
  on_expired_ = std::move(hook);
}

void TunnelGateway::control_loop() {
  while (!stopping_) {
    auto conn = net::accept(control_listener_);
    if (!conn) break;
    if (stopping_) break;
    handshake(std::move(*conn));
  }
}

void TunnelGateway::handshake(net::Socket conn) {
  net::set_recv_timeout(conn, std::chrono::milliseconds{2000});
  auto f = read_frame(conn);
  if (!f || f->type != FrameType::register_tunnel || f->payload.size() < 3) return;

  const auto port = static_cast<std::uint16_t>((static_cast<std::uint8_t>(f->payload[0]) << 8) |
                                               static_cast<std::uint8_t>(f->payload[1]));
  const std::string rest = f->payload.substr(2);
  const auto sp = rest.find(' ');
  const std::string pod = rest.substr(0, sp);
  const std::string target = sp == std::string::npos ? std::string{} : rest.substr(sp + 1);

  auto reject = [&](const std::string& why) {
    try {
      net::write_all(conn, encode_frame(FrameType::register_err, why.substr(0, kMaxPayload)));
    } catch (const Error&) {
    }
  };

  std::lock_guard lock(mu_);
  if (authorizer_ && !authorizer_(pod, port)) {
    reject("forbidden: port " + std::to_string(port) + " not assigned to " + pod);
    return;
  }
  if (tunnels_.count(port)) {
    reject("port-in-use: port " + std::to_string(port) + " already registered");
    return;
  }
  net::Socket listener;
  try {
    listener = net::listen_tcp(options_.bind_host, port);
  } catch (const Error& e) {
    reject(std::string(e.code() == Errc::port_in_use ? "port-in-use: " : "io: ") + e.what());
    return;
  }
  net::set_recv_timeout(conn, std::chrono::milliseconds{0});

  const Instant now = clock_.now();
  TunnelRegistration reg{pod, port, target, now, now};
  auto tunnel = std::make_shared<detail::Tunnel>(clock_, reg, std::move(conn), std::move(listener));
  if (!tunnel->send(encode_frame(FrameType::register_ok))) return;
  tunnel->start();
  tunnels_.emplace(port, std::move(tunnel));
  spdlog::debug("tunnel registered: {} on port {} -> {}", pod, port, target);
}

std::optional<TunnelRegistration> TunnelGateway::registration(std::uint16_t remote_port) const {
  std::shared_ptr<detail::Tunnel> t;
  {
    std::lock_guard lock(mu_);
    auto it = tunnels_.find(remote_port);
    if (it == tunnels_.end()) return std::nullopt;
    t = it->second;
  }
  std::lock_guard lock(t->ka_mu);
  return t->reg;
}

std::vector<TunnelRegistration> TunnelGateway::registrations() const {
  std::vector<std::shared_ptr<detail::Tunnel>> ts;
  {
    std::lock_guard lock(mu_);
    for (const auto& [p, t] : tunnels_) ts.push_back(t);
  }
  std::vector<TunnelRegistration> out;
  for (const auto& t : ts) {
    std::lock_guard lock(t->ka_mu);
    out.push_back(t->reg);
  }
  return out;
}

std::shared_ptr<detail::Tunnel> TunnelGateway::take_tunnel(std::uint16_t remote_port) {
  std::lock_guard lock(mu_);
  auto it = tunnels_.find(remote_port);
  if (it == tunnels_.end()) return nullptr;
  auto t = it->second;
  tunnels_.erase(it);
  return t;
}

void TunnelGateway::expire(std::shared_ptr<detail::Tunnel> tunnel, const std::string& reason) {
  const std::uint16_t port = tunnel->reg.remote_port;
  std::vector<std::shared_ptr<detail::Bridge>> riding;
  ExpiryHook hook;
  {
    std::lock_guard lock(mu_);
    for (auto it = bridges_.begin(); it != bridges_.end();) {
      if (it->second->info.remote_port == port) {
        riding.push_back(it->second);
        it = bridges_.erase(it);
      } else {
        ++it;
      }
    }
    hook = on_expired_;
  }
  for (auto& b : riding) b->teardown();
  tunnel->teardown();
  TunnelRegistration reg;
  {
    std::lock_guard lock(tunnel->ka_mu);
    reg = tunnel->reg;
  }
  spdlog::debug("tunnel {} on port {} closed: {}", reg.pod_name, port, reason);
  if (hook) hook(reg, reason);
}

TunnelState TunnelGateway::keepalive_tick(std::uint16_t remote_port, Instant now) {
  std::shared_ptr<detail::Tunnel> t;
  {
    std::lock_guard lock(mu_);
    auto it = tunnels_.find(remote_port);
    if (it == tunnels_.end()) return TunnelState::expired;
    t = it->second;
  }
  const KeepalivePolicy& ka = options_.keepalive;
  std::string reason;
  bool data = false;
  {
    std::lock_guard lock(t->ka_mu);
    const bool act = t->activity.exchange(false);
    data = t->data_seen.exchange(false);
    if (ka.enabled) {
      t->missed = act ? 0 : t->missed + 1;
      if (t->missed >= ka.max_missed) {
        reason = "keepalive: " + std::to_string(t->missed) + " consecutive probes unanswered";
      }
    }
    if (reason.empty() && options_.idle_timeout && now - t->last_traffic >= *options_.idle_timeout) {
      reason = "idle timeout";
    }
  }
  if (!reason.empty()) {
    if (auto taken = take_tunnel(remote_port)) expire(std::move(taken), reason);
    return TunnelState::expired;
  }
  if (ka.enabled && !data) {
    std::uint8_t seq;
    {
      std::lock_guard lock(t->ka_mu);
      seq = ++t->ping_seq;
      t->last_traffic = std::max(t->last_traffic, now);
    }
    t->send(encode_frame(FrameType::ping, std::string(1, static_cast<char>(seq))));
  }
  return TunnelState::alive;
}

std::vector<std::uint16_t> TunnelGateway::tick_all(Instant now) {
  std::vector<std::uint16_t> ports;
  {
    std::lock_guard lock(mu_);
    for (const auto& [p, t] : tunnels_) ports.push_back(p);
  }
  std::vector<std::uint16_t> expired;
  for (auto p : ports) {
    if (keepalive_tick(p, now) == TunnelState::expired) expired.push_back(p);
  }
  return expired;
}

bool TunnelGateway::await_keepalive(std::uint16_t remote_port, Instant at,
                                    std::chrono::milliseconds timeout) {
  std::shared_ptr<detail::Tunnel> t;
  {
    std::lock_guard lock(mu_);
    auto it = tunnels_.find(remote_port);
    if (it == tunnels_.end()) return false;
    t = it->second;
  }
  std::unique_lock lock(t->ka_mu);
  return t->ka_cv.wait_for(lock, timeout,
                           [&] { return t->reg.last_keepalive_at >= at || t->closed; }) &&
         !t->closed;
}

void TunnelGateway::close_tunnel(std::uint16_t remote_port, const std::string& reason) {
  if (auto t = take_tunnel(remote_port)) expire(std::move(t), reason);
}

WebBridge TunnelGateway::open_web_bridge(const std::string& session_id, std::uint16_t web_port,
                                         std::uint16_t remote_port) {
  std::lock_guard lock(mu_);
  if (!tunnels_.count(remote_port)) {
    throw Error(Errc::tunnel_expired, "no live tunnel on port " + std::to_string(remote_port));
  }
  auto existing = bridges_.find(session_id);
  if (existing != bridges_.end()) {
    const WebBridge& info = existing->second->info;
    if (info.web_port == web_port && info.remote_port == remote_port) return info;
    throw Error(Errc::conflict, "session " + session_id + " already has a different bridge");
  }
  auto bridge = std::make_shared<detail::Bridge>();
  bridge->info = {web_port, remote_port, session_id};
  bridge->host = options_.bind_host;
  bridge->listener = net::listen_tcp(options_.bind_host, web_port);
  bridge->acceptor = std::thread([b = bridge.get()] { b->accept_loop(); });
  bridges_.emplace(session_id, bridge);
  return bridge->info;
}

void TunnelGateway::close_web_bridge(const std::string& session_id) {
  std::shared_ptr<detail::Bridge> b;
  {
    std::lock_guard lock(mu_);
    auto it = bridges_.find(session_id);
    if (it == bridges_.end()) return;
    b = it->second;
    bridges_.erase(it);
  }
  b->teardown();
}

std::optional<WebBridge> TunnelGateway::web_bridge(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = bridges_.find(session_id);
  if (it == bridges_.end()) return std::nullopt;
  return it->second->info;
}

std::vector<WebBridge> TunnelGateway::web_bridges() const {
  std::lock_guard lock(mu_);
  std::vector<WebBridge> out;
  for (const auto& [s, b] : bridges_) out.push_back(b->info);
  return out;
}

bool TunnelGateway::listening(std::uint16_t port) const {
  {
    std::lock_guard lock(mu_);
    if (tunnels_.count(port)) return true;
    for (const auto& [s, b] : bridges_) {
      if (b->info.web_port == port) return true;
    }
  }
  return !net::port_bindable(options_.bind_host, port);
}

bool TunnelGateway::shut_down(std::uint16_t port) {
  if (auto t = take_tunnel(port)) {
    expire(std::move(t), "reclaimed");
    return true;
  }
  std::string bridge_session;
  {
    std::lock_guard lock(mu_);
    for (const auto& [s, b] : bridges_) {
      if (b->info.web_port == port) bridge_session = s;
    }
  }
  if (!bridge_session.empty()) {
    close_web_bridge(bridge_session);
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Pod side

struct TunnelClient::Channel {
  std::uint16_t id = 0;
  net::Socket target;
  std::thread reader;
  std::atomic<bool> reader_done{false};
  std::atomic<bool> gw_eof{false};
};

std::unique_ptr<TunnelClient> TunnelClient::open(const net::Endpoint& gateway,
                                                 const std::string& pod_name,
                                                 std::uint16_t remote_port,
                                                 const net::Endpoint& target,
                                                 std::chrono::milliseconds timeout) {
  net::Socket conn = net::connect_tcp(gateway, timeout);
  std::string payload;
  payload.push_back(static_cast<char>(remote_port >> 8));
  payload.push_back(static_cast<char>(remote_port & 0xff));
  payload += pod_name + " " + target.str();
  net::write_all(conn, encode_frame(FrameType::register_tunnel, payload));

  net::set_recv_timeout(conn, timeout);
  auto reply = read_frame(conn);
  if (!reply) throw Error(Errc::timeout, "no registration reply from gateway " + gateway.str());
  if (reply->type == FrameType::register_err) {
    const std::string& why = reply->payload;
    if (why.rfind("port-in-use", 0) == 0) throw Error(Errc::port_in_use, why);
    if (why.rfind("forbidden", 0) == 0) throw Error(Errc::forbidden, why);
    throw Error(Errc::io, why);
  }
  if (reply->type != FrameType::register_ok) {
    throw Error(Errc::io, "unexpected registration reply from gateway");
  }
  net::set_recv_timeout(conn, std::chrono::milliseconds{0});
  return std::unique_ptr<TunnelClient>(new TunnelClient(std::move(conn), remote_port, target));
}

TunnelClient::TunnelClient(net::Socket conn, std::uint16_t remote_port, net::Endpoint target)
    : conn_(std::move(conn)), remote_port_(remote_port), target_(std::move(target)) {
  reader_ = std::thread([this] { reader_loop(); });
}

TunnelClient::~TunnelClient() { close(); }

void TunnelClient::close() {
  alive_ = false;
  conn_.shutdown_both();
  if (reader_.joinable()) reader_.join();
  reap(true);
  conn_.close();
}

void TunnelClient::send(const std::string& frame) {
  std::lock_guard lock(write_mu_);
  try {
    net::write_all(conn_, frame);
  } catch (const Error&) {
    alive_ = false;
  }
}

void TunnelClient::reap(bool all) {
  std::map<std::uint16_t, std::shared_ptr<Channel>> done;
  {
    std::lock_guard lock(ch_mu_);
    for (auto it = channels_.begin(); it != channels_.end();) {
      if (all || (it->second->reader_done && it->second->gw_eof)) {
        done.emplace(it->first, it->second);
        it = channels_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& [id, ch] : done) ch->target.shutdown_both();
  for (auto& [id, ch] : done) {
    if (ch->reader.joinable()) ch->reader.join();
  }
}

void TunnelClient::reader_loop() {
  auto find = [this](std::uint16_t id) -> std::shared_ptr<Channel> {
    std::lock_guard lock(ch_mu_);
    auto it = channels_.find(id);
    return it == channels_.end() ? nullptr : it->second;
  };

  while (auto f = read_frame(conn_)) {
    switch (f->type) {
      case FrameType::ping:
        if (!frozen_) send(encode_frame(FrameType::pong, f->payload));
        break;
      case FrameType::open: {
        reap(false);
        const std::uint16_t id = frame_channel(*f);
        auto ch = std::make_shared<Channel>();
        ch->id = id;
        try {
          ch->target = net::connect_tcp(target_);
        } catch (const Error&) {
          send(encode_frame(FrameType::close, channel_payload(id)));
          break;
        }
        {
          std::lock_guard lock(ch_mu_);
          channels_[id] = ch;
        }
        ch->reader = std::thread([this, ch] {
          char buf[kMaxChunk];
          while (std::size_t n = net::read_some(ch->target, buf)) {
            send(encode_frame(FrameType::data, channel_payload(ch->id, std::string_view(buf, n))));
          }
          if (alive_) send(encode_frame(FrameType::eof, channel_payload(ch->id)));
          ch->reader_done = true;
        });
        break;
      }
      case FrameType::data:
        if (auto ch = find(frame_channel(*f))) {
          try {
            net::write_all(ch->target, frame_data(*f));
          } catch (const Error&) {
            ch->gw_eof = true;
            ch->target.shutdown_both();
            send(encode_frame(FrameType::close, channel_payload(ch->id)));
          }
        }
        break;
      case FrameType::eof:
        if (auto ch = find(frame_channel(*f))) {
          ch->gw_eof = true;
          ch->target.shutdown_write();
        }
        break;
      case FrameType::close:
        if (auto ch = find(frame_channel(*f))) {
          ch->gw_eof = true;
          ch->target.shutdown_both();
        }
        break;
      default:
        break;
    }
  }
  alive_ = false;
  std::lock_guard lock(ch_mu_);
  for (auto& [id, ch] : channels_) ch->target.shutdown_both();
}

}  // namespace podfed::tunnel
