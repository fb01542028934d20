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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "podfed/common/clock.hpp"
#include "podfed/common/types.hpp"

namespace podfed::sched {

enum class NodeRole { control_plane, worker };

struct ResourceRequest {
  std::int64_t cpu_millicores = 0;
  std::int64_t mem_bytes = 0;
  Labels node_selector;

  /// Throws invalid_argument unless both amounts are positive.
  void validate() const;
  bool operator==(const ResourceRequest&) const = default;
};

struct NodeDescriptor {
  std::string node_id;
  NodeRole role = NodeRole::worker;
  std::int64_t cpu_capacity_millicores = 0;
  std::int64_t mem_capacity_bytes = 0;
  Labels labels;
  std::int64_t allocated_cpu_millicores = 0;
  std::int64_t allocated_mem_bytes = 0;

  [[nodiscard]] std::int64_t free_cpu() const { return cpu_capacity_millicores - allocated_cpu_millicores; }
  [[nodiscard]] std::int64_t free_mem() const { return mem_capacity_bytes - allocated_mem_bytes; }
  bool operator==(const NodeDescriptor&) const = default;
};

[[nodiscard]] NodeDescriptor make_worker(std::string id, std::int64_t cpu_millicores,
                                         std::int64_t mem_bytes, Labels labels = {});

struct BindDecision {
  std::string pod_name;
  std::string node_id;
  double score = 0.0;  ///< in [0, 1]
  Instant decided_at{};

  bool operator==(const BindDecision&) const = default;
};

struct NodeScore {
  std::string node_id;
  double score = 0.0;
};

/// Workers with enough free cpu and memory whose labels contain the selector.
/// Input order is preserved.
[[nodiscard]] std::vector<NodeDescriptor> filter_nodes(const ResourceRequest& request,
                                                       std::span<const NodeDescriptor> nodes);

class SchedulingPolicy {
 public:
  virtual ~SchedulingPolicy() = default;
  [[nodiscard]] virtual std::string_view name() const = 0;
  /// Score in [0, 1] of placing `request` on `node`; higher is better.
  [[nodiscard]] virtual double score(const ResourceRequest& request,
                                     const NodeDescriptor& node) const = 0;
};

/// Mean of the free cpu and free memory fractions after the hypothetical
/// placement. Spreads load across nodes.
class LeastAllocatedPolicy final : public SchedulingPolicy {
 public:
  [[nodiscard]] std::string_view name() const override { return "least-allocated"; }
  [[nodiscard]] double score(const ResourceRequest& request,
                             const NodeDescriptor& node) const override;
};

/// Descending score; equal scores ordered by node id.
[[nodiscard]] std::vector<NodeScore> rank_nodes(const ResourceRequest& request,
                                                std::span<const NodeDescriptor> candidates,
                                                const SchedulingPolicy& policy);
[[nodiscard]] std::vector<NodeScore> rank_nodes(const ResourceRequest& request,
                                                std::span<const NodeDescriptor> candidates);

struct Placement {
  std::string node_id;
  ResourceRequest request;
};

/// Node inventory plus the pod placements that account for its allocations.
class ClusterState {
 public:
  void add_node(NodeDescriptor node);
  [[nodiscard]] std::vector<NodeDescriptor> nodes() const;  ///< sorted by id
  [[nodiscard]] const NodeDescriptor* node(const std::string& id) const;
  [[nodiscard]] const Placement* placement(const std::string& pod) const;
  [[nodiscard]] const std::map<std::string, Placement>& placements() const { return placements_; }

  /// Charges the request to the node. Throws if it does not fit.
  void place(const std::string& pod, const std::string& node_id, const ResourceRequest& request);
  /// Returns the released placement, if the pod was placed.
  std::optional<Placement> release(const std::string& pod);

  bool operator==(const ClusterState&) const;

 private:
  std::map<std::string, NodeDescriptor> nodes_;
  std::map<std::string, Placement> placements_;
};

struct BindOutcome {
  std::optional<BindDecision> decision;
  std::string pending_reason;

  [[nodiscard]] bool bound() const noexcept { return decision.has_value(); }
};

/// filter -> rank -> place on the top node. Leaves `state` untouched when
/// nothing fits.
[[nodiscard]] BindOutcome bind_pod(const std::string& pod_name, const ResourceRequest& request,
                               ClusterState& state, const SchedulingPolicy& policy, Instant now);

struct PendingPod {
  std::string pod_name;
  ResourceRequest request;
  std::string reason;
  Instant since{};
};

/// Owns cluster state; the only writer of node allocations.
///
/// Pods that cannot be placed stay queued as pending (FIFO) until `sweep()`
/// finds room, which callers invoke on pod deletion, node updates and on a
/// periodic timer.
class Scheduler {
 public:
  explicit Scheduler(const Clock& clock, std::unique_ptr<SchedulingPolicy> policy = nullptr);

  void add_node(NodeDescriptor node);

  /// Binds now or queues the pod as pending.
  BindOutcome submit(const std::string& pod_name, const ResourceRequest& request);
  /// Releases the pod's allocation and drops it from the pending queue.
  std::optional<Placement> unbind(const std::string& pod_name);
  /// Binds as many pending pods as now fit, in arrival order.
  std::vector<BindDecision> sweep();

  [[nodiscard]] ClusterState snapshot() const;
  [[nodiscard]] std::vector<PendingPod> pending() const;
  [[nodiscard]] std::optional<PendingPod> pending(const std::string& pod_name) const;
  [[nodiscard]] const SchedulingPolicy& policy() const { return *policy_; }

 private:
  const Clock& clock_;
  std::unique_ptr<SchedulingPolicy> policy_;
  mutable std::mutex mu_;
  ClusterState state_;
  std::vector<PendingPod> pending_;
};

[[nodiscard]] std::string_view to_string(NodeRole role) noexcept;

}  // namespace podfed::sched
