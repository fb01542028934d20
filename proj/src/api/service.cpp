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

#include "podfed/api/service.hpp"

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

namespace podfed::api {
namespace {

using nlohmann::json;

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json window_json(const reservation::Reservation& r) {
  return {{"reservation_id", r.reservation_id}, {"start", r.window.start}, {"end", r.window.end}};
}

bool is_admin(const ApiToken& t) { return t.role == Role::admin; }

}  // namespace

std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::requested:    return "Requested";
    case SessionState::provisioning: return "Provisioning";
    case SessionState::live:         return "Live";
    case SessionState::closed:       return "Closed";
  }
  return "unknown";
}

json to_json(const SessionDescriptor& s) {
  return {{"session_id", s.session_id},
          {"user_id", s.user_id},
          {"reservation_id", s.reservation_id},
          {"app", s.app},
          {"pod_name", optional_json(s.pod_name)},
          {"state", to_string(s.state)},
          {"web_port", s.web_port ? json(*s.web_port) : json(nullptr)},
          {"pod_phase", s.pod_phase},
          {"reason", s.reason},
          {"created_at_ms", unix_millis(s.created_at)}};
}

json to_json(const ResourceCounters& c) {
  return {{"index_entries", c.index_entries},
          {"pods", c.pods},
          {"allocated_cpu_millicores", c.allocated_cpu_millicores},
          {"allocated_mem_bytes", c.allocated_mem_bytes},
          {"tunnels", c.tunnels},
          {"web_bridges", c.web_bridges}};
}

std::string sanitize_file_name(const std::string& name) {
  if (name.empty() || name.size() > 255) throw Error(Errc::invalid_argument, "file name must be 1..255 bytes");
  if (name == "." || name == "..") throw Error(Errc::invalid_argument, "invalid file name");
  for (unsigned char c : name) {
    const bool ok = std::isalnum(c) || c == '.' || c == '_' || c == '-';
    if (!ok) throw Error(Errc::invalid_argument, "file name may only contain [A-Za-z0-9._-]");
  }
  return name;
}

FederationService::FederationService(Clock& clock, Authenticator& auth,
                                     const reservation::Inventory& inventory,
                                     reservation::ReservationBook& book, lifecycle::PodLifecycle& pods,
                                     sched::Scheduler& scheduler, ports::PortManager& ports,
                                     tunnel::TunnelGateway& gateway, sim::SimCluster& cluster,
                                     telemetry::MetricsRegistry& metrics, ServiceOptions options)
    : clock_(clock),
      auth_(auth),
      inventory_(inventory),
      book_(book),
      pods_(pods),
      scheduler_(scheduler),
      ports_(ports),
      gateway_(gateway),
      cluster_(cluster),
      metrics_(metrics),
      options_(std::move(options)) {}

ApiToken FederationService::authenticate(const std::string& user_id, const std::string& password) {
  return auth_.authenticate(user_id, password);
}

ApiToken FederationService::check(const std::string& token) const { return auth_.validate(token); }

json FederationService::inventory(const std::string& token, const reservation::InventoryFilter& filter) {
  (void)check(token);
  return reservation::to_json(inventory_.list(filter));
}

json FederationService::reservations(const std::string& token, const std::string& testbed_id) {
  (void)check(token);
  if (!testbed_id.empty()) (void)inventory_.testbed(testbed_id);
  json out = json::array();
  for (const auto& r : book_.list(testbed_id)) out.push_back(reservation::to_json(r));
  return {{"reservations", out}};
}

reservation::Reservation FederationService::reserve(const std::string& token,
                                                    reservation::ReservationRequest request) {
  const ApiToken who = check(token);
  request.user_id = who.user_id;
  try {
    return book_.create(request);
  } catch (const reservation::ReservationConflict& c) {
    throw ApiError(Errc::conflict, c.what(), {{"blocking", reservation::to_json(c.blocking())}});
  }
}

void FederationService::cancel_reservation(const std::string& token, const std::string& reservation_id) {
  const ApiToken who = check(token);
  book_.cancel(reservation_id, who.user_id, is_admin(who));
}

SessionDescriptor& FederationService::owned_session(const ApiToken& who, const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::not_found, "unknown session " + session_id);
  if (it->second.user_id != who.user_id && !is_admin(who)) {
    throw Error(Errc::forbidden, "session " + session_id + " belongs to another user");
  }
  return it->second;
}

void FederationService::sync(SessionDescriptor& s) {
  if (s.state == SessionState::closed) return;
  const auto pod = pods_.pod_of(s.session_id, s.app);
  if (!pod) {
    s.pod_name.reset();
    s.web_port.reset();
    s.pod_phase.clear();
    s.state = SessionState::provisioning;
    s.reason = "no pod; reconnect to provision a new instance";
    return;
  }
  s.pod_name = pod->name;
  s.pod_phase = std::string(lifecycle::to_string(pod->phase));
  if (pod->phase == lifecycle::Phase::ready && pod->ready) {
    try {
      const tunnel::WebBridge b = pods_.open_bridge(s.session_id, s.app);
      s.state = SessionState::live;
      s.web_port = b.web_port;
      s.reason.clear();
      return;
    } catch (const Error& e) {
      s.reason = e.what();
    }
  } else if (pod->phase == lifecycle::Phase::pending) {
    const auto pending = scheduler_.pending(pod->name);
    s.reason = pending ? pending->reason : pod->reason;
  } else {
    s.reason = pod->reason;
  }
  s.state = SessionState::provisioning;
  s.web_port.reset();
}

SessionDescriptor FederationService::connect(const std::string& token, const ConnectRequest& request) {
  const ApiToken who = check(token);
  const bool fresh = request.instance.empty() || request.instance == "new";

  std::string session_id;
  std::string app = request.app;
  std::string reservation_id = request.reservation_id;
  if (!fresh) {
    std::lock_guard lock(mu_);
    SessionDescriptor& s = owned_session(who, request.instance);
    if (s.state == SessionState::closed) {
      throw Error(Errc::not_found, "session " + s.session_id + " is closed");
    }
    if (!app.empty() && app != s.app) {
      throw Error(Errc::invalid_argument, "session " + s.session_id + " runs " + s.app + ", not " + app);
    }
    app = s.app;
    reservation_id = s.reservation_id;
    session_id = s.session_id;
  }
  if (app.empty()) throw Error(Errc::invalid_argument, "app required");

  const auto res = book_.find(reservation_id);
  if (!res) throw Error(Errc::not_found, "unknown reservation " + reservation_id);
  if (res->user_id != who.user_id && !is_admin(who)) {
    throw Error(Errc::forbidden, "reservation " + reservation_id + " belongs to another user");
  }
  const std::int64_t now = unix_seconds(clock_.now());
  if (!res->window.contains(now)) {
    json details = {{"reservation", window_json(*res)}, {"now", now}};
    const auto next = book_.next(res->user_id, now);
    details["next_window"] = next ? window_json(*next) : json(nullptr);
    throw ApiError(Errc::forbidden, "reservation " + reservation_id + " is not active now", details);
  }

  const auto& apps = pods_.options().apps;
  auto profile = apps.find(app);
  if (profile == apps.end()) throw Error(Errc::not_found, "unknown app " + app);
  sched::ResourceRequest req = profile->second.request;
  req.node_selector["node"] = res->node_id;

  if (fresh) {
    std::lock_guard lock(mu_);
    session_id = "sess-" + std::to_string(next_session_++);
    SessionDescriptor s;
    s.session_id = session_id;
    s.user_id = res->user_id;
    s.reservation_id = res->reservation_id;
    s.app = app;
    s.created_at = clock_.now();
    sessions_.emplace(session_id, std::move(s));
  }

  try {
    if (fresh) {
      (void)pods_.provision(session_id, app, req);
    } else {
      (void)pods_.connect_or_reuse(session_id, app, req);
    }
  } catch (const Error& e) {
    std::lock_guard lock(mu_);
    if (fresh) sessions_.erase(session_id);
    spdlog::warn("connect {} for {} failed: {}", fresh ? "new" : session_id, who.user_id, e.what());
    throw;
  }

  std::lock_guard lock(mu_);
  SessionDescriptor& s = sessions_.at(session_id);
  sync(s);
  return s;
}

SessionDescriptor FederationService::disconnect(const std::string& token, const std::string& session_id) {
  const ApiToken who = check(token);
  {
    std::lock_guard lock(mu_);
    SessionDescriptor& s = owned_session(who, session_id);
    if (s.state == SessionState::closed) return s;
  }
  if (pods_.session_known(session_id)) pods_.terminate(session_id);
  std::lock_guard lock(mu_);
  SessionDescriptor& s = sessions_.at(session_id);
  s.state = SessionState::closed;
  s.web_port.reset();
  s.pod_phase.clear();
  s.reason = "disconnected";
  return s;
}

std::vector<SessionDescriptor> FederationService::sessions(const std::string& token) {
  const ApiToken who = check(token);
  std::lock_guard lock(mu_);
  std::vector<SessionDescriptor> out;
  for (auto& [id, s] : sessions_) {
    if (s.state == SessionState::closed) continue;
    if (s.user_id != who.user_id && !is_admin(who)) continue;
    sync(s);
    out.push_back(s);
  }
  return out;
}

json FederationService::cluster_status(const std::string& token) {
  const ApiToken who = check(token);
  json pods = json::array();
  for (const auto& p : pods_.pods()) {
    pods.push_back({{"name", p.name},
                    {"app", p.app},
                    {"phase", lifecycle::to_string(p.phase)},
                    {"ready", p.ready},
                    {"node_id", optional_json(p.node_id)}});
  }
  const std::int64_t now = unix_seconds(clock_.now());
  std::map<std::string, std::string> holders;  // device -> reservation active now
  for (const auto& r : book_.list()) {
    if (!r.window.contains(now)) continue;
    for (const auto& d : r.device_ids) holders[d] = r.reservation_id;
  }
  json devices = json::array();
  for (const auto& lt : inventory_.list()) {
    for (const auto& tb : lt.testbeds) {
      for (const auto& d : tb.devices) {
        json jd = reservation::to_json(d);
        jd["testbed_id"] = tb.testbed_id;
        auto h = holders.find(d.device_id);
        jd["reserved_by"] = h == holders.end() ? json(nullptr) : json(h->second);
        devices.push_back(std::move(jd));
      }
    }
  }
  json out = {{"timestamp_ms", unix_millis(clock_.now())}, {"pods", pods}, {"devices", devices}};
  if (!is_admin(who)) return out;

  json nodes = json::array();
  for (const auto& st : cluster_.report_status()) {
    json n = sim::to_json(st);
    const sched::ClusterState snap = scheduler_.snapshot();
    if (const auto* d = snap.node(st.node_id)) {
      n["cpu_capacity_millicores"] = d->cpu_capacity_millicores;
      n["mem_capacity_bytes"] = d->mem_capacity_bytes;
      n["labels"] = d->labels;
    }
    nodes.push_back(std::move(n));
  }
  json pending = json::array();
  for (const auto& p : scheduler_.pending()) {
    pending.push_back({{"pod", p.pod_name}, {"reason", p.reason}, {"since_ms", unix_millis(p.since)}});
  }
  json tunnels = json::array();
  for (const auto& t : gateway_.registrations()) {
    tunnels.push_back({{"pod", t.pod_name},
                       {"remote_port", t.remote_port},
                       {"target", t.target},
                       {"established_at_ms", unix_millis(t.established_at)},
                       {"last_keepalive_at_ms", unix_millis(t.last_keepalive_at)}});
  }
  json bridges = json::array();
  for (const auto& b : gateway_.web_bridges()) {
    bridges.push_back({{"session_id", b.session_id}, {"web_port", b.web_port}, {"remote_port", b.remote_port}});
  }
  out["nodes"] = nodes;
  out["pending"] = pending;
  out["tunnels"] = tunnels;
  out["web_bridges"] = bridges;
  out["counters"] = to_json(counters());
  return out;
}

json FederationService::pod_status(const std::string& token, const std::string& pod_name) {
  const ApiToken who = check(token);
  const auto pod = pods_.pod(pod_name);
  if (!pod) throw Error(Errc::not_found, "unknown pod " + pod_name);
  if (!is_admin(who)) {
    std::lock_guard lock(mu_);
    auto it = pod->owner_session ? sessions_.find(*pod->owner_session) : sessions_.end();
    if (it == sessions_.end() || it->second.user_id != who.user_id) {
      throw Error(Errc::forbidden, "pod " + pod_name + " belongs to another user");
    }
  }
  json out = lifecycle::to_json(*pod);
  if (const auto pending = scheduler_.pending(pod_name)) out["pending_reason"] = pending->reason;
  out["mem_bytes"] = nullptr;
  if (pod->node_id) {
    if (const auto mem = cluster_.agent(*pod->node_id).memory(pod_name)) out["mem_bytes"] = *mem;
  }
  return out;
}

UploadResult FederationService::upload(const std::string& token, const std::string& session_id,
                                       const std::string& file_name, const std::string& content) {
  const ApiToken who = check(token);
  if (content.size() > options_.upload_max_bytes) {
    throw Error(Errc::too_large, "upload exceeds " + std::to_string(options_.upload_max_bytes) + " bytes");
  }
  const std::string name = sanitize_file_name(file_name);
  std::string pod_name;
  {
    std::lock_guard lock(mu_);
    SessionDescriptor& s = owned_session(who, session_id);
    if (s.state == SessionState::closed) throw Error(Errc::not_found, "session " + session_id + " is closed");
    sync(s);
    if (!s.pod_name) throw Error(Errc::not_found, "session " + session_id + " has no pod");
    pod_name = *s.pod_name;
  }
  const std::filesystem::path dir = options_.upload_dir / pod_name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  const std::filesystem::path path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  return {session_id, pod_name, path.string(), content.size()};
}

std::string FederationService::metrics() {
  pods_.publish_metrics();
  return metrics_.scrape();
}

ResourceCounters FederationService::counters() {
  ResourceCounters c;
  c.index_entries = ports_.entries().size();
  c.pods = pods_.pod_count();
  for (const auto& n : scheduler_.snapshot().nodes()) {
    c.allocated_cpu_millicores += n.allocated_cpu_millicores;
    c.allocated_mem_bytes += n.allocated_mem_bytes;
  }
  c.tunnels = gateway_.registrations().size();
  c.web_bridges = gateway_.web_bridges().size();
  return c;
}

void FederationService::refresh() {
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    if (s.state == SessionState::provisioning || s.state == SessionState::live) sync(s);
  }
}

}  // namespace podfed::api
