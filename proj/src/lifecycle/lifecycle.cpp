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

#include "podfed/lifecycle/lifecycle.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "podfed/common/error.hpp"

namespace podfed::lifecycle {
namespace {

using nlohmann::json;

json optional_ms(const std::optional<Instant>& t) {
  return t ? json(unix_millis(*t)) : json(nullptr);
}

std::string fmt_seconds(Duration d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", to_seconds(d));
  return buf;
}

}  // namespace

std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::pending:     return "Pending";
    case Phase::binding:     return "Binding";
    case Phase::pulling:     return "Pulling";
    case Phase::starting:    return "Starting";
    case Phase::ready:       return "Ready";
    case Phase::terminating: return "Terminating";
    case Phase::failed:      return "Failed";
  }
  return "Unknown";
}

json to_json(const PodRecord& p) {
  json selector = json::object();
  for (const auto& [k, v] : p.request.node_selector) selector[k] = v;
  return {{"name", p.name},
          {"app", p.app},
          {"index", p.index},
          {"phase", to_string(p.phase)},
          {"ready", p.ready},
          {"node_id", p.node_id ? json(*p.node_id) : json(nullptr)},
          {"request",
           {{"cpu_millicores", p.request.cpu_millicores},
            {"mem_bytes", p.request.mem_bytes},
            {"node_selector", selector}}},
          {"ports", {{"index", p.ports.index}, {"remote_port", p.ports.remote_port}, {"web_port", p.ports.web_port}}},
          {"owner_session", p.owner_session ? json(*p.owner_session) : json(nullptr)},
          {"created_at_ms", unix_millis(p.created_at)},
          {"bound_at_ms", optional_ms(p.bound_at)},
          {"ready_at_ms", optional_ms(p.ready_at)},
          {"reason", p.reason},
          {"failed_step", p.failed_step},
          {"restarts", p.restarts}};
}

void ProbeConfig::validate() const {
  if (readiness_period.count() <= 0 || liveness_period.count() <= 0) {
    throw Error(Errc::invalid_argument, "probe periods must be > 0");
  }
  if (failure_threshold < 1) throw Error(Errc::invalid_argument, "failure_threshold must be >= 1");
}

json to_json(const LifecycleEvent& e) {
  return {{"ts", unix_millis(e.ts)}, {"pod", e.pod},   {"from", e.from},
          {"to", e.to},              {"reason", e.reason}, {"step", e.step}};
}

EventLog::EventLog(const std::filesystem::path& file) : file_(file, std::ios::app) {
  if (!file_) throw Error(Errc::io, "cannot open event log " + file.string());
}

void EventLog::append(LifecycleEvent e) {
  const std::string line = to_json(e).dump();
  spdlog::debug("lifecycle {}", line);
  std::lock_guard lock(mu_);
  if (file_.is_open()) file_ << line << '\n' << std::flush;
  events_.push_back(std::move(e));
}

std::vector<LifecycleEvent> EventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<LifecycleEvent> EventLog::events_for(const std::string& pod) const {
  std::lock_guard lock(mu_);
  std::vector<LifecycleEvent> out;
  for (const auto& e : events_) {
    if (e.pod == pod) out.push_back(e);
  }
  return out;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void EventLog::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

// ---------------------------------------------------------------------------

PodLifecycle::PodLifecycle(Clock& clock, sched::Scheduler& scheduler, ports::PortManager& ports,
                           tunnel::TunnelGateway& gateway, sim::SimCluster& cluster, EventLog& events,
                           LifecycleOptions options, telemetry::MetricsRegistry* metrics)
    : clock_(clock),
      scheduler_(scheduler),
      ports_(ports),
      gateway_(gateway),
      cluster_(cluster),
      events_(events),
      options_(std::move(options)),
      metrics_(metrics) {
  options_.probes.validate();
  if (options_.plan.step_timeout.count() <= 0) {
    throw Error(Errc::invalid_argument, "startup step timeout must be > 0");
  }
  last_sweep_ = last_keepalive_ = clock_.now();
}

PodLifecycle::EntryPtr PodLifecycle::find(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = pods_.find(name);
  return it == pods_.end() ? nullptr : it->second;
}

const AppProfile& PodLifecycle::profile(const std::string& app) const {
  auto it = options_.apps.find(app);
  if (it == options_.apps.end()) throw Error(Errc::not_found, "unknown app " + app);
  return it->second;
}

void PodLifecycle::transition(Entry& e, Phase to, const std::string& reason, const std::string& step) {
  std::string name, from;
  {
    std::lock_guard lock(mu_);
    from = std::string(to_string(e.rec.phase));
    e.rec.phase = to;
    if (to != Phase::ready) e.rec.ready = false;
    name = e.rec.name;
  }
  events_.append({clock_.now(), name, from, std::string(to_string(to)), reason, step});
}

void PodLifecycle::step_event(Entry& e, const std::string& reason, sim::StartupStep step) {
  std::string name, phase;
  {
    std::lock_guard lock(mu_);
    name = e.rec.name;
    phase = std::string(to_string(e.rec.phase));
  }
  events_.append({clock_.now(), name, phase, phase, reason, std::string(sim::to_string(step))});
}

PodRecord PodLifecycle::provision(const std::string& session_id, const std::string& app,
                                  const sched::ResourceRequest& request) {
  request.validate();
  if (session_id.empty()) throw Error(Errc::invalid_argument, "session id must not be empty");
  if (auto existing = pod_of(session_id, app); existing && existing->phase != Phase::failed) {
    throw Error(Errc::conflict, "session " + session_id + " already owns " + existing->name);
  }

  const ports::PortAssignment pa = ports_.allocate(app, session_id);
  const std::string name = ordinal_name(app, pa.index);

  auto entry = std::make_shared<Entry>();
  std::unique_lock op(entry->op);
  entry->rec.name = name;
  entry->rec.app = app;
  entry->rec.index = pa.index;
  entry->rec.request = request;
  entry->rec.ports = pa;
  entry->rec.owner_session = session_id;
  entry->rec.created_at = clock_.now();
  {
    std::lock_guard lock(mu_);
    if (pods_.count(name)) {
      throw Error(Errc::conflict, "index store handed out " + name + ", which is still live");
    }
    bool clash = false;
    for (const auto& [n, e] : pods_) {
      if (e->rec.owner_session == session_id && e->rec.app == app && e->rec.phase != Phase::failed) {
        clash = true;
      }
    }
    if (clash) {
      ports_.release(name);
      throw Error(Errc::conflict, "concurrent provision for session " + session_id + " / " + app);
    }
    pods_.emplace(name, entry);
    sessions_.insert(session_id);
  }
  events_.append({entry->rec.created_at, name, "", "Pending", "created for session " + session_id, ""});

  sched::BindOutcome out;
  try {
    out = scheduler_.submit(name, request);
  } catch (...) {
    {
      std::lock_guard lock(mu_);
      pods_.erase(name);
    }
    ports_.release(name);
    throw;
  }
  if (!out.bound()) {
    {
      std::lock_guard lock(mu_);
      entry->rec.reason = out.pending_reason;
    }
    events_.append({clock_.now(), name, "Pending", "Pending", out.pending_reason, ""});
    std::lock_guard lock(mu_);
    return entry->rec;
  }
  run_pipeline(*entry, *out.decision);
  std::lock_guard lock(mu_);
  return entry->rec;
}

void PodLifecycle::run_pipeline(Entry& e, const sched::BindDecision& decision) {
  std::string name, app, image;
  sim::PodSpec spec;
  {
    std::lock_guard lock(mu_);
    e.rec.node_id = decision.node_id;
    e.rec.bound_at = decision.decided_at;
    e.rec.reason.clear();
    name = e.rec.name;
    app = e.rec.app;
    auto it = options_.apps.find(app);
    image = it == options_.apps.end() || it->second.image.empty() ? app : it->second.image;
    spec = {name, app, image, e.rec.request, e.rec.ports};
    if (metrics_) {
      try {
        metrics_->record("pod_scheduling_delay_seconds", {{"pod", name}},
                         to_seconds(decision.decided_at - e.rec.created_at), decision.decided_at);
      } catch (const Error& ex) {
        spdlog::debug("metric dropped: {}", ex.what());
      }
    }
  }
  transition(e, Phase::binding, "scheduled on " + decision.node_id);

  sim::NodeAgent& agent = cluster_.agent(decision.node_id);
  try {
    agent.accept_bind(decision, spec);
  } catch (const Error& ex) {
    scheduler_.unbind(name);
    {
      std::lock_guard lock(mu_);
      e.rec.node_id.reset();
      e.rec.bound_at.reset();
      e.rec.reason = ex.what();
    }
    transition(e, Phase::pending, std::string("bind rejected: ") + ex.what());
    return;
  }

  transition(e, Phase::pulling, "pulling image " + image);
  const Duration pulled = agent.pull(name);
  events_.append({clock_.now(), name, "Pulling", "Pulling",
                  pulled.count() == 0 ? "image " + image + " cached on node"
                                      : "pulled image " + image + " in " + fmt_seconds(pulled) + " s",
                  ""});
  run_startup(e);
}

void PodLifecycle::run_startup(Entry& e) {
  std::string name, node;
  std::uint16_t remote_port = 0;
  Phase phase;
  {
    std::lock_guard lock(mu_);
    name = e.rec.name;
    node = *e.rec.node_id;
    remote_port = e.rec.ports.remote_port;
    phase = e.rec.phase;
  }
  sim::NodeAgent& agent = cluster_.agent(node);
  gateway_.close_tunnel(remote_port, "pod starting");
  try {
    agent.start_sandbox(name);
  } catch (const Error& ex) {
    fail(e, ex.what(), "");
    return;
  }
  if (phase != Phase::starting) transition(e, Phase::starting, "running startup plan");

  for (sim::StartupStep step : options_.plan.steps) {
    try {
      const Duration took = agent.run_step(name, step, gateway_.control_endpoint(), options_.plan.step_timeout);
      step_event(e, "step complete in " + fmt_seconds(took) + " s", step);
    } catch (const Error& ex) {
      fail(e, ex.what(), std::string(sim::to_string(step)));
      return;
    }
  }
  agent.mark_running(name);
  const Instant now = clock_.now();
  {
    std::lock_guard lock(mu_);
    e.rec.ready_at = now;
    e.rec.failed_step.clear();
    e.rec.reason.clear();
  }
  e.liveness_failures = 0;
  e.readiness_failures = 0;
  e.last_liveness = e.last_readiness = now;
  transition(e, Phase::ready, "startup plan complete");
  std::lock_guard lock(mu_);
  e.rec.ready = true;
}

void PodLifecycle::fail(Entry& e, const std::string& reason, const std::string& step) {
  std::string name;
  std::optional<std::string> node;
  std::uint16_t remote_port = 0;
  {
    std::lock_guard lock(mu_);
    name = e.rec.name;
    node = e.rec.node_id;
    remote_port = e.rec.ports.remote_port;
    e.rec.reason = reason;
    e.rec.failed_step = step;
  }
  if (node) cluster_.agent(*node).mark_failed(name);
  gateway_.close_tunnel(remote_port, "pod failed");
  scheduler_.unbind(name);
  transition(e, Phase::failed, reason, step);
  spdlog::warn("pod {} failed{}: {}", name, step.empty() ? "" : " at " + step, reason);
}

void PodLifecycle::teardown(Entry& e) {
  std::string name;
  std::optional<std::string> node, session;
  std::uint16_t remote_port = 0;
  {
    std::lock_guard lock(mu_);
    name = e.rec.name;
    node = e.rec.node_id;
    session = e.rec.owner_session;
    remote_port = e.rec.ports.remote_port;
  }
  transition(e, Phase::terminating, "terminate requested");
  // 1. processes
  if (node) cluster_.agent(*node).remove(name);
  // 2. tunnel and any bridge riding on it
  gateway_.close_tunnel(remote_port, "pod terminated");
  if (session) {
    if (auto b = gateway_.web_bridge(*session); b && b->remote_port == remote_port) {
      gateway_.close_web_bridge(*session);
    }
  }
  // 3. node allocation (also drops a pending scheduling request)
  scheduler_.unbind(name);
  // 4. index entry, which returns both ports to the pool
  ports_.release(name);
  events_.append({clock_.now(), name, "Terminating", "", "deleted", ""});
  std::lock_guard lock(mu_);
  pods_.erase(name);
}

void PodLifecycle::terminate_pod(const std::string& pod_name) {
  EntryPtr e = find(pod_name);
  if (!e) return;
  {
    std::lock_guard op(e->op);
    if (find(pod_name) != e) return;  // torn down while we waited
    teardown(*e);
  }
}

void PodLifecycle::terminate(const std::string& session_id) {
  std::vector<std::string> names;
  {
    std::lock_guard lock(mu_);
    if (!sessions_.count(session_id)) throw Error(Errc::not_found, "unknown session " + session_id);
    for (const auto& [name, e] : pods_) {
      if (e->rec.owner_session == session_id) names.push_back(name);
    }
  }
  for (const auto& n : names) terminate_pod(n);
  if (!names.empty()) reschedule();
}

PodRecord PodLifecycle::connect_or_reuse(const std::string& session_id, const std::string& app,
                                         const std::optional<sched::ResourceRequest>& request) {
  if (auto existing = pod_of(session_id, app)) {
    if (existing->phase != Phase::failed) return *existing;
    terminate_pod(existing->name);
  }
  return provision(session_id, app, request ? *request : profile(app).request);
}

tunnel::WebBridge PodLifecycle::open_bridge(const std::string& session_id, const std::string& app) {
  auto p = pod_of(session_id, app);
  if (!p) throw Error(Errc::not_found, "session " + session_id + " has no " + app + " pod");
  if (p->phase != Phase::ready) {
    throw Error(Errc::pod_not_ready, p->name + " is " + std::string(to_string(p->phase)));
  }
  return gateway_.open_web_bridge(session_id, p->ports.web_port, p->ports.remote_port);
}

std::optional<Phase> PodLifecycle::probe_tick(const std::string& pod_name) {
  EntryPtr e = find(pod_name);
  if (!e) return std::nullopt;
  std::lock_guard op(e->op);
  std::string node;
  bool was_ready = false;
  {
    std::lock_guard lock(mu_);
    if (e->rec.phase != Phase::ready && e->rec.phase != Phase::starting) return std::nullopt;
    if (!e->rec.node_id) return std::nullopt;
    node = *e->rec.node_id;
    was_ready = e->rec.phase == Phase::ready && e->rec.ready;
  }
  sim::NodeAgent& agent = cluster_.agent(node);
  const Instant now = clock_.now();
  const bool live = agent.probe_liveness(pod_name);
  const bool ready = agent.probe_readiness(pod_name);
  e->last_liveness = e->last_readiness = now;
  e->liveness_failures = live ? 0 : e->liveness_failures + 1;
  e->readiness_failures = ready ? 0 : e->readiness_failures + 1;

  const std::uint32_t threshold = options_.probes.failure_threshold;
  if (e->liveness_failures >= threshold) {
    const std::uint32_t failures = e->liveness_failures;
    {
      std::lock_guard lock(mu_);
      ++e->rec.restarts;
    }
    transition(*e, Phase::starting,
               "liveness probe failed " + std::to_string(failures) + " times; restarting");
    run_startup(*e);
    std::lock_guard lock(mu_);
    return e->rec.phase;
  }

  bool phase_ready;
  {
    std::lock_guard lock(mu_);
    phase_ready = e->rec.phase == Phase::ready;
  }
  if (phase_ready) {
    const bool now_ready = e->readiness_failures < threshold;
    if (now_ready != was_ready) {
      {
        std::lock_guard lock(mu_);
        e->rec.ready = now_ready;
      }
      events_.append({now, pod_name, "Ready", "Ready",
                      now_ready ? "readiness probe passed" : "readiness probe failing: NotReady", ""});
    }
  }
  return std::nullopt;
}

std::vector<std::string> PodLifecycle::reschedule() {
  std::vector<std::string> bound;
  for (const sched::BindDecision& d : scheduler_.sweep()) {
    EntryPtr e = find(d.pod_name);
    if (!e) {
      scheduler_.unbind(d.pod_name);
      continue;
    }
    std::lock_guard op(e->op);
    bool ok;
    {
      std::lock_guard lock(mu_);
      ok = pods_.count(d.pod_name) && pods_.at(d.pod_name) == e && e->rec.phase == Phase::pending;
    }
    if (!ok) continue;
    run_pipeline(*e, d);
    bound.push_back(d.pod_name);
  }
  return bound;
}

void PodLifecycle::tick() {
  std::unique_lock guard(tick_mu_, std::try_to_lock);
  if (!guard) return;
  const Instant now = clock_.now();

  if (now - last_keepalive_ >= gateway_.options().keepalive.interval) {
    last_keepalive_ = now;
    for (auto port : gateway_.tick_all(now)) spdlog::info("tunnel on port {} expired", port);
  }
  if (now - last_sweep_ >= options_.sweep_period) {
    last_sweep_ = now;
    reschedule();
  }

  const Duration probe_period = std::min(options_.probes.liveness_period, options_.probes.readiness_period);
  std::vector<std::string> due;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, e] : pods_) {
      const bool running = e->rec.phase == Phase::ready || e->rec.phase == Phase::starting;
      if (running && now - e->last_liveness >= probe_period) due.push_back(name);
    }
  }
  for (const auto& name : due) probe_tick(name);
  publish_metrics();
}

void PodLifecycle::publish_metrics() {
  if (!metrics_) return;
  const Instant now = clock_.now();
  auto put = [&](const std::string& name, const Labels& labels, double v) {
    try {
      metrics_->record(name, labels, v, now);
    } catch (const Error& ex) {
      spdlog::debug("metric dropped: {}", ex.what());
    }
  };
  std::map<std::string, std::string> app_of;
  std::map<std::string, int> phases;
  for (Phase p : {Phase::pending, Phase::binding, Phase::pulling, Phase::starting, Phase::ready,
                  Phase::terminating, Phase::failed}) {
    phases[std::string(to_string(p))] = 0;
  }
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, e] : pods_) {
      app_of[name] = e->rec.app;
      ++phases[std::string(to_string(e->rec.phase))];
    }
  }
  for (const auto& [phase, n] : phases) put("pods", {{"phase", phase}}, n);
  for (const sim::NodeStatus& s : cluster_.report_status()) {
    put("node_allocated_mem_bytes", {{"node", s.node_id}}, static_cast<double>(s.allocated_mem_bytes));
    put("node_measured_mem_bytes", {{"node", s.node_id}}, static_cast<double>(s.measured_mem_bytes));
    put("node_allocated_cpu_millicores", {{"node", s.node_id}},
        static_cast<double>(s.allocated_cpu_millicores));
    for (const auto& p : s.pods) {
      if (!app_of.count(p.pod_name)) continue;
      put("pod_memory_bytes", {{"app", p.app}, {"node", s.node_id}, {"pod", p.pod_name}},
          static_cast<double>(p.mem_bytes));
    }
  }
  put("tunnels_registered", {}, static_cast<double>(gateway_.registrations().size()));
}

std::optional<PodRecord> PodLifecycle::pod(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = pods_.find(name);
  if (it == pods_.end()) return std::nullopt;
  return it->second->rec;
}

std::optional<PodRecord> PodLifecycle::pod_of(const std::string& session_id, const std::string& app) const {
  std::lock_guard lock(mu_);
  std::optional<PodRecord> failed;
  for (const auto& [name, e] : pods_) {
    if (e->rec.owner_session != session_id || e->rec.app != app) continue;
    if (e->rec.phase != Phase::failed) return e->rec;
    failed = e->rec;
  }
  return failed;
}

std::vector<PodRecord> PodLifecycle::pods() const {
  std::lock_guard lock(mu_);
  std::vector<PodRecord> out;
  for (const auto& [name, e] : pods_) out.push_back(e->rec);
  return out;
}

std::size_t PodLifecycle::pod_count() const {
  std::lock_guard lock(mu_);
  return pods_.size();
}

bool PodLifecycle::session_known(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return sessions_.count(session_id) > 0;
}

std::vector<std::uint32_t> PodLifecycle::live_ordinals(const std::string& app) {
  std::lock_guard lock(mu_);
  std::vector<std::uint32_t> out;
  for (const auto& [name, e] : pods_) {
    if (e->rec.app == app && e->rec.phase != Phase::failed) out.push_back(e->rec.index);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string PodLifecycle::create_replica(const std::string& app) {
  std::string session;
  {
    std::lock_guard lock(mu_);
    session = "replica-" + app + "-" + std::to_string(++replica_seq_);
  }
  return provision(session, app, profile(app).request).name;
}

void PodLifecycle::terminate_replica(const std::string& pod_name) {
  terminate_pod(pod_name);
  reschedule();
}

}  // namespace podfed::lifecycle
