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

#include "podfed/sim/sim_edge.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "podfed/common/error.hpp"

namespace podfed::sim {
namespace {

constexpr std::size_t kProbeHistory = 16;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool starts_with_get(std::string_view s) { return s.rfind("GET ", 0) == 0; }

}  // namespace

std::string_view to_string(StartupStep step) noexcept {
  switch (step) {
    case StartupStep::establish_tunnel: return "establish-reverse-tunnel";
    case StartupStep::start_display:    return "start-display-server";
    case StartupStep::start_desktop:    return "start-desktop";
  }
  return "unknown";
}

void SimClusterSpec::validate() const {
  if (workers.empty()) throw Error(Errc::invalid_argument, "cluster needs at least one worker");
  for (const auto& w : workers) {
    if (w.role != sched::NodeRole::worker) {
      throw Error(Errc::invalid_argument, "node " + w.node_id + " listed as worker has another role");
    }
  }
  if (!(noise_fraction >= 0.0 && noise_fraction < 0.1)) {
    throw Error(Errc::invalid_argument, "noise_fraction must be in [0, 0.1)");
  }
  if (ramp_duration.count() <= 0) throw Error(Errc::invalid_argument, "ramp duration must be > 0");
  if (pull_delay.count() < 0) throw Error(Errc::invalid_argument, "pull delay must be >= 0");
}

SimClusterSpec SimClusterSpec::desk_scale() {
  SimClusterSpec s;
  for (int i = 1; i <= 3; ++i) {
    s.workers.push_back(sched::make_worker("node-" + std::to_string(i), 4000, 32 * kGiB));
  }
  s.control_plane.node_id = "control-plane";
  s.control_plane.role = sched::NodeRole::control_plane;
  s.control_plane.cpu_capacity_millicores = 4000;
  s.control_plane.mem_capacity_bytes = 16 * kGiB;
  return s;
}

double MemRampModel::expected(Instant t) const {
  if (t <= t0) return 0.0;
  const double frac = std::min(1.0, to_seconds(t - t0) / to_seconds(ramp_duration));
  return static_cast<double>(request_bytes) * frac;
}

double MemRampModel::epsilon(Instant t) const {
  if (noise_fraction == 0.0) return 0.0;
  const std::uint64_t key =
      splitmix64(seed ^ splitmix64(fnv1a(pod) ^ static_cast<std::uint64_t>(t.time_since_epoch().count())));
  const double u = static_cast<double>(key >> 11) * 0x1.0p-53;  // [0, 1)
  return (2.0 * u - 1.0) * noise_fraction;
}

std::int64_t MemRampModel::sample(Instant t) const {
  return std::llround(expected(t) * (1.0 + epsilon(t)));
}

// ---------------------------------------------------------------------------

PodSandbox::PodSandbox(std::string pod_name, std::string app)
    : pod_name_(std::move(pod_name)), app_(std::move(app)) {
  display_listener_ = net::listen_tcp("127.0.0.1", 0);
  display_endpoint_ = {"127.0.0.1", net::local_port(display_listener_)};
}

PodSandbox::~PodSandbox() { stop(); }

void PodSandbox::open_tunnel(const net::Endpoint& gateway, std::uint16_t remote_port) {
  auto client = tunnel::TunnelClient::open(gateway, pod_name_, remote_port, display_endpoint_);
  std::lock_guard lock(mu_);
  tunnel_ = std::move(client);
}

void PodSandbox::start_display() {
  if (stopped_) throw Error(Errc::io, "sandbox of " + pod_name_ + " is stopped");
  if (display_running_.exchange(true)) return;
  display_thread_ = std::thread([this] { display_loop(); });
}

void PodSandbox::start_desktop() {
  if (!display_running_) throw Error(Errc::io, "desktop needs a running display");
  desktop_running_ = true;
}

bool PodSandbox::tunnel_alive() const {
  std::lock_guard lock(mu_);
  return tunnel_ && tunnel_->alive();
}

void PodSandbox::freeze_tunnel(bool frozen) {
  std::lock_guard lock(mu_);
  if (tunnel_) tunnel_->set_frozen(frozen);
}

void PodSandbox::kill_tunnel() {
  std::lock_guard lock(mu_);
  if (tunnel_) tunnel_->close();
}

std::string PodSandbox::banner() const {
  return "podfed stub desktop | pod=" + pod_name_ + " app=" + app_ +
         (desktop_running_ ? " desktop=running" : " desktop=starting");
}

void PodSandbox::display_loop() {
  while (!stopped_) {
    auto conn = net::accept(display_listener_);
    if (!conn) break;
    auto sock = std::make_shared<net::Socket>(std::move(*conn));
    std::lock_guard lock(mu_);
    if (stopped_) break;
    conns_.emplace_back(sock, std::thread([this, sock] { serve(sock); }));
  }
}

void PodSandbox::serve(std::shared_ptr<net::Socket> conn) const {
  try {
    char buf[4096];
    std::size_t n = net::read_some(*conn, buf);
    if (n == 0) return;
    std::string first(buf, n);
    if (starts_with_get(first)) {
      while (first.find("\r\n\r\n") == std::string::npos && first.size() < 16384) {
        n = net::read_some(*conn, buf);
        if (n == 0) break;
        first.append(buf, n);
      }
      const std::string body =
          "<!doctype html><html><head><title>" + pod_name_ + "</title></head><body><h1>" +
          pod_name_ + "</h1><p>" + banner() + "</p></body></html>\n";
      net::write_all(*conn, "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: " +
                                std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n" + body);
      conn->shutdown_write();
      return;
    }
    net::write_all(*conn, first);
    while ((n = net::read_some(*conn, buf)) > 0) net::write_all(*conn, std::string_view(buf, n));
    conn->shutdown_write();
  } catch (const Error&) {
    conn->shutdown_both();
  }
}

void PodSandbox::stop() {
  if (stopped_.exchange(true)) return;
  display_listener_.shutdown_both();
  if (display_thread_.joinable()) display_thread_.join();
  display_listener_.close();
  std::vector<std::pair<std::shared_ptr<net::Socket>, std::thread>> conns;
  std::unique_ptr<tunnel::TunnelClient> tunnel;
  {
    std::lock_guard lock(mu_);
    conns.swap(conns_);
    tunnel.swap(tunnel_);
  }
  for (auto& [s, t] : conns) s->shutdown_both();
  for (auto& [s, t] : conns) t.join();
  if (tunnel) tunnel->close();
  display_running_ = false;
  desktop_running_ = false;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const NodeStatus& s) {
  nlohmann::json pods = nlohmann::json::array();
  for (const auto& p : s.pods) {
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& r : p.probes) {
      probes.push_back({{"at_ms", unix_millis(r.at)}, {"liveness", r.liveness}, {"readiness", r.readiness}});
    }
    pods.push_back({{"pod", p.pod_name},
                    {"app", p.app},
                    {"state", p.state},
                    {"request", {{"cpu_millicores", p.request.cpu_millicores}, {"mem_bytes", p.request.mem_bytes}}},
                    {"mem_bytes", p.mem_bytes},
                    {"probes", probes}});
  }
  return {{"node_id", s.node_id},
          {"timestamp_us", s.timestamp.time_since_epoch().count()},
          {"draining", s.draining},
          {"allocated_cpu_millicores", s.allocated_cpu_millicores},
          {"allocated_mem_bytes", s.allocated_mem_bytes},
          {"measured_mem_bytes", s.measured_mem_bytes},
          {"pods", pods}};
}

NodeAgent::NodeAgent(Clock& clock, sched::NodeDescriptor node, const SimClusterSpec& params)
    : clock_(clock), node_(std::move(node)), params_(params) {}

NodeAgent::~NodeAgent() {
  std::map<std::string, Pod> pods;
  {
    std::lock_guard lock(mu_);
    pods.swap(pods_);
  }
  pods.clear();  // sandboxes stop outside the lock
}

NodeAgent::Pod& NodeAgent::pod(const std::string& name) {
  auto it = pods_.find(name);
  if (it == pods_.end()) throw Error(Errc::not_found, "pod " + name + " is not on node " + node_.node_id);
  return it->second;
}

const NodeAgent::Pod& NodeAgent::pod(const std::string& name) const {
  return const_cast<NodeAgent*>(this)->pod(name);
}

void NodeAgent::accept_bind(const sched::BindDecision& decision, const PodSpec& spec) {
  if (decision.node_id != node_.node_id) {
    throw Error(Errc::invalid_argument, "bind for " + decision.node_id + " sent to " + node_.node_id);
  }
  if (draining_) throw Error(Errc::unavailable, "node " + node_.node_id + " is draining");
  std::lock_guard lock(mu_);
  if (pods_.count(spec.pod_name)) throw Error(Errc::conflict, "pod " + spec.pod_name + " already on node");
  Pod p;
  p.spec = spec;
  p.ramp = MemRampModel{spec.request.mem_bytes, params_.ramp_duration, clock_.now(),
                        params_.noise_fraction, params_.seed, spec.pod_name};
  pods_.emplace(spec.pod_name, std::move(p));
}

Duration NodeAgent::pull(const std::string& pod_name) {
  std::string image;
  {
    std::lock_guard lock(mu_);
    Pod& p = pod(pod_name);
    p.state = "pulling";
    image = p.spec.image.empty() ? p.spec.app : p.spec.image;
    if (image_cache_.count(image)) return Duration::zero();
  }
  const Instant start = clock_.now();
  clock_.sleep_for(params_.pull_delay);
  std::lock_guard lock(mu_);
  image_cache_.insert(image);
  return clock_.now() - start;
}

bool NodeAgent::image_cached(const std::string& image) const {
  std::lock_guard lock(mu_);
  return image_cache_.count(image) > 0;
}

void NodeAgent::start_sandbox(const std::string& pod_name) {
  std::string app;
  {
    std::lock_guard lock(mu_);
    app = pod(pod_name).spec.app;
  }
  auto fresh = std::make_unique<PodSandbox>(pod_name, app);
  std::unique_ptr<PodSandbox> old;
  {
    std::lock_guard lock(mu_);
    Pod& p = pod(pod_name);
    old = std::move(p.sandbox);
    p.sandbox = std::move(fresh);
    p.state = "starting";
    p.ramp.t0 = clock_.now();
    p.ramp_started = true;
  }
  if (old) old->stop();
}

Duration NodeAgent::run_step(const std::string& pod_name, StartupStep step,
                             const net::Endpoint& gateway, Duration timeout) {
  PodSandbox* box = nullptr;
  Duration delay{};
  bool fail = false;
  std::uint16_t remote_port = 0;
  {
    std::lock_guard lock(mu_);
    Pod& p = pod(pod_name);
    box = p.sandbox.get();
    remote_port = p.spec.ports.remote_port;
    auto f = faults_.find(pod_name);
    if (f != faults_.end()) {
      if (auto d = f->second.step_delay.find(step); d != f->second.step_delay.end()) delay = d->second;
      fail = f->second.step_failures.count(step) > 0;
    }
  }
  if (!box) throw Error(Errc::io, "pod " + pod_name + " has no sandbox");

  const Instant start = clock_.now();
  if (delay.count() > 0) clock_.sleep_for(delay);
  if (clock_.now() - start > timeout) {
    throw Error(Errc::timeout, std::string(to_string(step)) + " exceeded its " +
                                   std::to_string(to_seconds(timeout)) + " s timeout");
  }
  if (fail) throw Error(Errc::io, std::string(to_string(step)) + " failed (injected)");
  switch (step) {
    case StartupStep::establish_tunnel: box->open_tunnel(gateway, remote_port); break;
    case StartupStep::start_display:    box->start_display(); break;
    case StartupStep::start_desktop:    box->start_desktop(); break;
  }
  return clock_.now() - start;
}

void NodeAgent::mark_running(const std::string& pod_name) {
  std::lock_guard lock(mu_);
  pod(pod_name).state = "running";
}

void NodeAgent::mark_failed(const std::string& pod_name) {
  std::unique_ptr<PodSandbox> box;
  {
    std::lock_guard lock(mu_);
    Pod& p = pod(pod_name);
    p.state = "failed";
    box = std::move(p.sandbox);
  }
  if (box) box->stop();
}

void NodeAgent::stop(const std::string& pod_name) {
  std::unique_ptr<PodSandbox> box;
  {
    std::lock_guard lock(mu_);
    auto it = pods_.find(pod_name);
    if (it == pods_.end()) return;
    it->second.state = "stopped";
    box = std::move(it->second.sandbox);
  }
  if (box) box->stop();
}

void NodeAgent::remove(const std::string& pod_name) {
  std::unique_ptr<PodSandbox> box;
  {
    std::lock_guard lock(mu_);
    auto it = pods_.find(pod_name);
    if (it == pods_.end()) return;
    box = std::move(it->second.sandbox);
    pods_.erase(it);
  }
  if (box) box->stop();
}

void NodeAgent::record_probe(Pod& p, bool liveness, bool readiness) {
  p.probes.push_back({clock_.now(), liveness, readiness});
  if (p.probes.size() > kProbeHistory) p.probes.erase(p.probes.begin());
}

bool NodeAgent::probe_liveness(const std::string& pod_name) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod_name);
  if (it == pods_.end()) return false;
  Pod& p = it->second;
  bool ok = p.sandbox && p.sandbox->display_running() && p.sandbox->tunnel_alive();
  if (auto f = faults_.find(pod_name); f != faults_.end() && f->second.liveness_failures > 0) {
    --f->second.liveness_failures;
    ok = false;
  }
  record_probe(p, ok, p.probes.empty() || p.probes.back().readiness);
  return ok;
}

bool NodeAgent::probe_readiness(const std::string& pod_name) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod_name);
  if (it == pods_.end()) return false;
  Pod& p = it->second;
  bool ok = p.sandbox && p.sandbox->desktop_running();
  if (auto f = faults_.find(pod_name); f != faults_.end() && f->second.readiness_failures > 0) {
    --f->second.readiness_failures;
    ok = false;
  }
  record_probe(p, p.probes.empty() || p.probes.back().liveness, ok);
  return ok;
}

std::optional<std::int64_t> NodeAgent::memory(const std::string& pod_name) const {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod_name);
  if (it == pods_.end() || !it->second.ramp_started) return std::nullopt;
  return it->second.ramp.sample(clock_.now());
}

PodSandbox* NodeAgent::sandbox(const std::string& pod_name) {
  std::lock_guard lock(mu_);
  auto it = pods_.find(pod_name);
  return it == pods_.end() ? nullptr : it->second.sandbox.get();
}

bool NodeAgent::has_pod(const std::string& pod_name) const {
  std::lock_guard lock(mu_);
  return pods_.count(pod_name) > 0;
}

void NodeAgent::inject(const std::string& pod_name, FaultPlan faults) {
  std::lock_guard lock(mu_);
  faults_[pod_name] = std::move(faults);
}

NodeStatus NodeAgent::report_status() {
  std::lock_guard lock(mu_);
  NodeStatus s;
  s.node_id = node_.node_id;
  s.draining = draining_;
  const Instant now = clock_.now();
  s.timestamp = std::max(now, last_report_ + Duration{1});
  last_report_ = s.timestamp;
  for (const auto& [name, p] : pods_) {
    PodStatus ps{name, p.spec.app, p.state, p.spec.request,
                 p.ramp_started ? p.ramp.sample(now) : 0, p.probes};
    s.allocated_cpu_millicores += p.spec.request.cpu_millicores;
    s.allocated_mem_bytes += p.spec.request.mem_bytes;
    s.measured_mem_bytes += ps.mem_bytes;
    s.pods.push_back(std::move(ps));
  }
  return s;
}

// ---------------------------------------------------------------------------

SimCluster::SimCluster(Clock& clock, SimClusterSpec spec) : clock_(clock), spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& w : spec_.workers) {
    if (agents_.count(w.node_id)) throw Error(Errc::invalid_argument, "duplicate worker " + w.node_id);
    agents_.emplace(w.node_id, std::make_unique<NodeAgent>(clock_, w, spec_));
  }
}

NodeAgent& SimCluster::agent(const std::string& node_id) {
  auto it = agents_.find(node_id);
  if (it == agents_.end()) throw Error(Errc::not_found, "no agent for node " + node_id);
  return *it->second;
}

std::vector<std::string> SimCluster::worker_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, a] : agents_) out.push_back(id);
  return out;
}

std::vector<sched::NodeDescriptor> SimCluster::nodes() const {
  std::vector<sched::NodeDescriptor> out;
  if (!spec_.control_plane.node_id.empty()) out.push_back(spec_.control_plane);
  for (const auto& w : spec_.workers) out.push_back(w);
  return out;
}

void SimCluster::inject(const std::string& pod_name, const FaultPlan& faults) {
  for (auto& [id, a] : agents_) a->inject(pod_name, faults);
}

std::vector<NodeStatus> SimCluster::report_status() {
  std::vector<NodeStatus> out;
  for (auto& [id, a] : agents_) out.push_back(a->report_status());
  return out;
}

void SimCluster::note_scale(const ScaleSignal& signal) {
  std::lock_guard lock(mu_);
  auto& d = desired_[signal.app];
  d = std::max(d, signal.target_replicas);
  spdlog::debug("scale signal: {} -> {} replicas", signal.app, signal.target_replicas);
}

std::uint32_t SimCluster::desired_replicas(const std::string& app) const {
  std::lock_guard lock(mu_);
  auto it = desired_.find(app);
  return it == desired_.end() ? 0 : it->second;
}

std::vector<LifecycleAction> apply_scale(const ScaleSignal& signal, ReplicaController& controller) {
  std::vector<LifecycleAction> actions;
  auto live = controller.live_ordinals(signal.app);
  std::sort(live.begin(), live.end());
  std::size_t count = live.size();
  while (count < signal.target_replicas) {
    try {
      actions.push_back({LifecycleAction::Kind::create, controller.create_replica(signal.app)});
    } catch (const Error& e) {
      spdlog::warn("scale {} to {} stopped at {} replicas: {}", signal.app, signal.target_replicas,
                   count, e.what());
      break;
    }
    ++count;
  }
  while (live.size() > signal.target_replicas) {
    const std::string name = ordinal_name(signal.app, live.back());
    controller.terminate_replica(name);
    actions.push_back({LifecycleAction::Kind::terminate, name});
    live.pop_back();
  }
  return actions;
}

}  // namespace podfed::sim
