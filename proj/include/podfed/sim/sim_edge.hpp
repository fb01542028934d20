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
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"
#include "podfed/common/types.hpp"
#include "podfed/net/socket.hpp"
#include "podfed/ports/port_manager.hpp"
#include "podfed/sched/scheduler.hpp"
#include "podfed/tunnel/gateway.hpp"

namespace podfed::sim {

enum class StartupStep { establish_tunnel, start_display, start_desktop };

[[nodiscard]] std::string_view to_string(StartupStep step) noexcept;

struct SimClusterSpec {
  std::vector<sched::NodeDescriptor> workers;
  sched::NodeDescriptor control_plane;
  Duration ramp_duration = std::chrono::seconds{120};
  double noise_fraction = 0.02;
  Duration pull_delay = std::chrono::seconds{2};
  std::uint64_t seed = 1;

  /// Throws invalid_argument: no workers, non-worker in `workers`,
  /// noise_fraction outside [0, 0.1), non-positive ramp.
  void validate() const;

  /// Three 4-core / 32 GiB workers plus one control-plane node.
  static SimClusterSpec desk_scale();
};

/// Pod memory over time: R * min(1, (t - t0) / T) * (1 + eps), with eps a
/// deterministic pseudo-random value in [-noise, +noise] keyed on
/// (seed, pod, t).
struct MemRampModel {
  std::int64_t request_bytes = 0;
  Duration ramp_duration = std::chrono::seconds{120};
  Instant t0{};
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string pod;

  /// Noise-free value; 0 before t0.
  [[nodiscard]] double expected(Instant t) const;
  [[nodiscard]] double epsilon(Instant t) const;
  [[nodiscard]] std::int64_t sample(Instant t) const;
};

/// Faults a test can inject into one pod's processes.
struct FaultPlan {
  std::uint32_t liveness_failures = 0;   ///< next N liveness probes fail
  std::uint32_t readiness_failures = 0;  ///< next N readiness probes fail
  std::map<StartupStep, Duration> step_delay;
  std::set<StartupStep> step_failures;
};

/// The processes of one running pod: a reverse-tunnel client, a stub display
/// service and a stub desktop. The display answers an HTTP GET with a banner
/// naming the pod and echoes any other byte stream.
class PodSandbox {
 public:
  PodSandbox(std::string pod_name, std::string app);
  ~PodSandbox();
  PodSandbox(const PodSandbox&) = delete;
  PodSandbox& operator=(const PodSandbox&) = delete;

  /// Pod-local address the tunnel relays to. Bound at construction so the
  /// tunnel can be registered before the display starts accepting.
  [[nodiscard]] net::Endpoint display_endpoint() const { return display_endpoint_; }

  void open_tunnel(const net::Endpoint& gateway, std::uint16_t remote_port);
  void start_display();
  void start_desktop();
  /// Stops every process; the sandbox cannot be restarted.
  void stop();

  [[nodiscard]] bool tunnel_alive() const;
  [[nodiscard]] bool display_running() const { return display_running_; }
  [[nodiscard]] bool desktop_running() const { return desktop_running_; }
  /// Freezes the tunnel client: the socket stays open but pings go unanswered.
  void freeze_tunnel(bool frozen);
  /// Drops the tunnel connection as a crashed process would.
  void kill_tunnel();

  [[nodiscard]] std::string banner() const;
  [[nodiscard]] const std::string& pod_name() const { return pod_name_; }

 private:
  void display_loop();
  void serve(std::shared_ptr<net::Socket> conn) const;

  std::string pod_name_;
  std::string app_;
  net::Socket display_listener_;
  net::Endpoint display_endpoint_;
  std::thread display_thread_;
  std::atomic<bool> display_running_{false};
  std::atomic<bool> desktop_running_{false};
  std::atomic<bool> stopped_{false};

  mutable std::mutex mu_;
  std::unique_ptr<tunnel::TunnelClient> tunnel_;
  std::vector<std::pair<std::shared_ptr<net::Socket>, std::thread>> conns_;
};

struct ProbeResult {
  Instant at{};
  bool liveness = true;
  bool readiness = true;
};

struct PodStatus {
  std::string pod_name;
  std::string app;
  std::string state;  ///< pulling | starting | running | stopped | failed
  sched::ResourceRequest request;
  std::int64_t mem_bytes = 0;  ///< measured (ramp model)
  std::vector<ProbeResult> probes;  ///< most recent last
};

struct NodeStatus {
  std::string node_id;
  Instant timestamp{};
  bool draining = false;
  std::int64_t allocated_cpu_millicores = 0;  ///< sum of pod requests
  std::int64_t allocated_mem_bytes = 0;
  std::int64_t measured_mem_bytes = 0;  ///< sum of pod ramps
  std::vector<PodStatus> pods;
};

nlohmann::json to_json(const NodeStatus& s);

struct PodSpec {
  std::string pod_name;
  std::string app;
  std::string image;
  sched::ResourceRequest request;
  ports::PortAssignment ports;
};

/// Kubelet analog for one worker: pulls images (with a per-node cache),
/// runs pod sandboxes, answers probes and reports status.
class NodeAgent {
 public:
  NodeAgent(Clock& clock, sched::NodeDescriptor node, const SimClusterSpec& params);
  ~NodeAgent();

  [[nodiscard]] const std::string& node_id() const { return node_.node_id; }
  [[nodiscard]] const sched::NodeDescriptor& descriptor() const { return node_; }

  /// Registers the pod on this node. Errors: unavailable (node draining),
  /// conflict (pod already present).
  void accept_bind(const sched::BindDecision& decision, const PodSpec& spec);
  /// Simulated image pull; returns the simulated latency (0 on cache hit).
  Duration pull(const std::string& pod_name);
  /// Creates fresh processes for the pod (first start and restarts) and
  /// restarts its memory ramp at the current time.
  void start_sandbox(const std::string& pod_name);
  /// Runs one startup step on the pod's sandbox, honoring injected faults.
  /// Returns the simulated step duration. Errors: timeout, io.
  Duration run_step(const std::string& pod_name, StartupStep step, const net::Endpoint& gateway,
                    Duration timeout);
  void mark_running(const std::string& pod_name);
  void mark_failed(const std::string& pod_name);
  /// Stops the pod's processes; the pod stays registered.
  void stop(const std::string& pod_name);
  /// Stops and forgets the pod.
  void remove(const std::string& pod_name);

  bool probe_liveness(const std::string& pod_name);
  bool probe_readiness(const std::string& pod_name);

  [[nodiscard]] std::optional<std::int64_t> memory(const std::string& pod_name) const;
  [[nodiscard]] PodSandbox* sandbox(const std::string& pod_name);
  [[nodiscard]] bool has_pod(const std::string& pod_name) const;
  [[nodiscard]] bool image_cached(const std::string& image) const;

  void inject(const std::string& pod_name, FaultPlan faults);
  void set_draining(bool draining) { draining_ = draining; }

  /// Snapshot timestamps are strictly increasing across calls.
  NodeStatus report_status();

 private:
  struct Pod {
    PodSpec spec;
    std::string state = "pulling";
    MemRampModel ramp;
    bool ramp_started = false;
    std::unique_ptr<PodSandbox> sandbox;
    std::vector<ProbeResult> probes;
  };

  Pod& pod(const std::string& name);
  const Pod& pod(const std::string& name) const;
  void record_probe(Pod& p, bool liveness, bool readiness);

  Clock& clock_;
  sched::NodeDescriptor node_;
  SimClusterSpec params_;
  std::atomic<bool> draining_{false};

  mutable std::mutex mu_;
  std::map<std::string, Pod> pods_;
  std::set<std::string> image_cache_;
  std::map<std::string, FaultPlan> faults_;
  Instant last_report_{};
};

/// The simulated edge cluster: one agent per worker plus the control plane.
class SimCluster {
 public:
  SimCluster(Clock& clock, SimClusterSpec spec);

  [[nodiscard]] const SimClusterSpec& spec() const { return spec_; }
  [[nodiscard]] NodeAgent& agent(const std::string& node_id);
  [[nodiscard]] std::vector<std::string> worker_ids() const;
  /// Node descriptors for seeding a scheduler (control plane included).
  [[nodiscard]] std::vector<sched::NodeDescriptor> nodes() const;

  /// Applies a fault plan to the named pod on whichever node runs it, now
  /// or later.
  void inject(const std::string& pod_name, const FaultPlan& faults);
  [[nodiscard]] std::vector<NodeStatus> report_status();

  /// Records the replica count a port allocation implied.
  void note_scale(const ScaleSignal& signal);
  [[nodiscard]] std::uint32_t desired_replicas(const std::string& app) const;

 private:
  Clock& clock_;
  SimClusterSpec spec_;
  std::map<std::string, std::unique_ptr<NodeAgent>> agents_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint32_t> desired_;
};

/// What the replica reconciler needs from the lifecycle layer.
class ReplicaController {
 public:
  virtual ~ReplicaController() = default;
  /// Ordinals of the app's live (non-terminated) replicas.
  [[nodiscard]] virtual std::vector<std::uint32_t> live_ordinals(const std::string& app) = 0;
  /// Provisions one replica at the lowest free ordinal; returns its name.
  virtual std::string create_replica(const std::string& app) = 0;
  virtual void terminate_replica(const std::string& pod_name) = 0;
};

struct LifecycleAction {
  enum class Kind { create, terminate };
  Kind kind = Kind::create;
  std::string pod_name;

  bool operator==(const LifecycleAction&) const = default;
};

/// Reconciles the live replica count toward the signal's target: creates at
/// the lowest free ordinals, terminates the highest ordinals first. Stops
/// early (partial satisfaction) when provisioning throws.
std::vector<LifecycleAction> apply_scale(const ScaleSignal& signal, ReplicaController& controller);

}  // namespace podfed::sim
