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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"
#include "podfed/ports/port_manager.hpp"
#include "podfed/sched/scheduler.hpp"
#include "podfed/sim/sim_edge.hpp"
#include "podfed/telemetry/metrics.hpp"
#include "podfed/tunnel/gateway.hpp"

namespace podfed::lifecycle {

enum class Phase { pending, binding, pulling, starting, ready, terminating, failed };

[[nodiscard]] std::string_view to_string(Phase p) noexcept;

struct PodRecord {
  std::string name;  ///< "<app>-<index>"
  std::string app;
  std::uint32_t index = 0;
  Phase phase = Phase::pending;
  bool ready = false;  ///< readiness condition; only meaningful in Ready
  std::optional<std::string> node_id;
  sched::ResourceRequest request;
  ports::PortAssignment ports;
  std::optional<std::string> owner_session;
  Instant created_at{};
  std::optional<Instant> bound_at;
  std::optional<Instant> ready_at;
  std::string reason;       ///< pending reason or failure cause
  std::string failed_step;  ///< startup step that failed, if any
  std::uint32_t restarts = 0;
};

nlohmann::json to_json(const PodRecord& p);

struct StartupPlan {
  std::vector<sim::StartupStep> steps{sim::StartupStep::establish_tunnel,
                                      sim::StartupStep::start_display,
                                      sim::StartupStep::start_desktop};
  Duration step_timeout = std::chrono::seconds{30};
};

struct ProbeConfig {
  Duration readiness_period = std::chrono::seconds{5};
  Duration liveness_period = std::chrono::seconds{10};
  std::uint32_t failure_threshold = 3;

  void validate() const;
};

/// Image and resource request used when a session connects to an app.
struct AppProfile {
  std::string image;
  sched::ResourceRequest request;
};

struct LifecycleOptions {
  StartupPlan plan;
  ProbeConfig probes;
  std::map<std::string, AppProfile> apps;
  Duration sweep_period = std::chrono::seconds{5};
};

struct LifecycleEvent {
  Instant ts{};
  std::string pod;
  std::string from;  ///< phase name, "" when the pod is created
  std::string to;    ///< phase name, "" when the pod is deleted
  std::string reason;
  std::string step;  ///< startup step, for step events

  bool operator==(const LifecycleEvent&) const = default;
};

nlohmann::json to_json(const LifecycleEvent& e);

/// Structured lifecycle log: kept in memory, optionally appended to a file
/// as JSON lines.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::filesystem::path& file);

  void append(LifecycleEvent e);
  [[nodiscard]] std::vector<LifecycleEvent> events() const;
  [[nodiscard]] std::vector<LifecycleEvent> events_for(const std::string& pod) const;
  [[nodiscard]] std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<LifecycleEvent> events_;
  std::ofstream file_;
};

/// Drives experiment pods from creation to deletion:
///   allocate ports -> schedule -> bind -> pull -> startup plan -> Ready,
/// plus probes with restart-in-place, reuse on reconnect, and ordered
/// cleanup (processes, tunnel and bridge, allocation, index).
///
/// Operations on one pod are serialized; different pods proceed in
/// parallel and meet only in the scheduler and port manager.
class PodLifecycle final : public sim::ReplicaController {
 public:
  PodLifecycle(Clock& clock, sched::Scheduler& scheduler, ports::PortManager& ports,
               tunnel::TunnelGateway& gateway, sim::SimCluster& cluster, EventLog& events,
               LifecycleOptions options, telemetry::MetricsRegistry* metrics = nullptr);

  /// New pod for the session. Returns Ready, Failed, or Pending (no
  /// capacity; the index stays reserved). Errors: not_found (app without a
  /// port range), conflict (session already owns a live pod of the app),
  /// exhausted, reclaim_failed, unavailable.
  PodRecord provision(const std::string& session_id, const std::string& app,
                      const sched::ResourceRequest& request);
  /// The session's pod of `app` unless it is missing or Failed, in which
  /// case a replacement is provisioned with `request` (default: the app
  /// profile's request).
  PodRecord connect_or_reuse(const std::string& session_id, const std::string& app,
                             const std::optional<sched::ResourceRequest>& request = std::nullopt);
  /// Tears down every pod of the session. Errors: not_found for a session
  /// never seen; repeated calls are no-ops.
  void terminate(const std::string& session_id);
  /// Tears one pod down (same order as terminate). No-op if absent.
  void terminate_pod(const std::string& pod_name);

  /// Opens the web bridge for the session's pod of `app`.
  /// Errors: not_found, pod_not_ready, tunnel_expired.
  tunnel::WebBridge open_bridge(const std::string& session_id, const std::string& app);

  /// One liveness + readiness probe. Returns the new phase when the probe
  /// caused a transition (restart or failure).
  std::optional<Phase> probe_tick(const std::string& pod_name);
  /// Binds pending pods that now fit and runs their pipelines.
  std::vector<std::string> reschedule();
  /// Periodic driver: keepalives, scheduling sweep, probes and metrics,
  /// each on its own period.
  void tick();
  /// Records pod and node memory gauges and phase counts.
  void publish_metrics();

  [[nodiscard]] std::optional<PodRecord> pod(const std::string& name) const;
  [[nodiscard]] std::optional<PodRecord> pod_of(const std::string& session_id, const std::string& app) const;
  [[nodiscard]] std::vector<PodRecord> pods() const;
  [[nodiscard]] std::size_t pod_count() const;
  [[nodiscard]] bool session_known(const std::string& session_id) const;
  [[nodiscard]] const LifecycleOptions& options() const { return options_; }

  // sim::ReplicaController
  std::vector<std::uint32_t> live_ordinals(const std::string& app) override;
  std::string create_replica(const std::string& app) override;
  void terminate_replica(const std::string& pod_name) override;

 private:
  struct Entry {
    std::mutex op;  ///< serializes lifecycle operations on this pod
    PodRecord rec;  ///< guarded by PodLifecycle::mu_
    std::uint32_t liveness_failures = 0;
    std::uint32_t readiness_failures = 0;
    Instant last_liveness{};
    Instant last_readiness{};
  };
  using EntryPtr = std::shared_ptr<Entry>;

  EntryPtr find(const std::string& name) const;
  void transition(Entry& e, Phase to, const std::string& reason, const std::string& step = {});
  void step_event(Entry& e, const std::string& reason, sim::StartupStep step);
  /// Bound pod -> Ready or Failed. Caller holds e.op.
  void run_pipeline(Entry& e, const sched::BindDecision& decision);
  /// Startup plan on the pod's node. Caller holds e.op.
  void run_startup(Entry& e);
  void fail(Entry& e, const std::string& reason, const std::string& step);
  /// Caller holds e.op.
  void teardown(Entry& e);
  const AppProfile& profile(const std::string& app) const;

  Clock& clock_;
  sched::Scheduler& scheduler_;
  ports::PortManager& ports_;
  tunnel::TunnelGateway& gateway_;
  sim::SimCluster& cluster_;
  EventLog& events_;
  LifecycleOptions options_;
  telemetry::MetricsRegistry* metrics_;

  mutable std::mutex mu_;
  std::map<std::string, EntryPtr> pods_;
  std::set<std::string> sessions_;  ///< every session that ever owned a pod
  std::mutex tick_mu_;
  Instant last_sweep_{};
  Instant last_keepalive_{};
  std::uint64_t replica_seq_ = 0;
};

}  // namespace podfed::lifecycle
