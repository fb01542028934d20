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

#include "podfed/sched/scheduler.hpp"

#include <algorithm>

#include "podfed/common/error.hpp"

namespace podfed::sched {
namespace {

bool labels_match(const Labels& selector, const Labels& labels) {
  for (const auto& [k, v] : selector) {
    auto it = labels.find(k);
    if (it == labels.end() || it->second != v) return false;
  }
  return true;
}

bool fits(const ResourceRequest& req, const NodeDescriptor& node) {
  return node.role == NodeRole::worker && node.free_cpu() >= req.cpu_millicores &&
         node.free_mem() >= req.mem_bytes && labels_match(req.node_selector, node.labels);
}

std::string unschedulable_reason(const ResourceRequest& req, std::span<const NodeDescriptor> nodes) {
  std::size_t workers = 0, cpu = 0, mem = 0, selector = 0;
  for (const auto& n : nodes) {
    if (n.role != NodeRole::worker) continue;
    ++workers;
    if (!labels_match(req.node_selector, n.labels)) {
      ++selector;
      continue;
    }
    if (n.free_cpu() < req.cpu_millicores) ++cpu;
    if (n.free_mem() < req.mem_bytes) ++mem;
  }
  std::string r = "0/" + std::to_string(workers) + " workers available";
  if (selector) r += "; " + std::to_string(selector) + " node(s) didn't match node selector";
  if (cpu) r += "; " + std::to_string(cpu) + " Insufficient cpu";
  if (mem) r += "; " + std::to_string(mem) + " Insufficient memory";
  return r;
}

}  // namespace

void ResourceRequest::validate() const {
  if (cpu_millicores <= 0 || mem_bytes <= 0) {
    throw Error(Errc::invalid_argument, "resource request needs positive cpu and memory");
  }
}

NodeDescriptor make_worker(std::string id, std::int64_t cpu_millicores, std::int64_t mem_bytes,
                           Labels labels) {
  NodeDescriptor n;
  n.node_id = std::move(id);
  n.role = NodeRole::worker;
  n.cpu_capacity_millicores = cpu_millicores;
  n.mem_capacity_bytes = mem_bytes;
  n.labels = std::move(labels);
  return n;
}

std::vector<NodeDescriptor> filter_nodes(const ResourceRequest& request,
                                         std::span<const NodeDescriptor> nodes) {
  std::vector<NodeDescriptor> out;
  for (const auto& n : nodes) {
    if (fits(request, n)) out.push_back(n);
  }
  return out;
}

double LeastAllocatedPolicy::score(const ResourceRequest& request, const NodeDescriptor& node) const {
  const double cpu_free = static_cast<double>(node.free_cpu() - request.cpu_millicores) /
                          static_cast<double>(node.cpu_capacity_millicores);
  const double mem_free = static_cast<double>(node.free_mem() - request.mem_bytes) /
                          static_cast<double>(node.mem_capacity_bytes);
  return std::clamp((cpu_free + mem_free) / 2.0, 0.0, 1.0);
}

std::vector<NodeScore> rank_nodes(const ResourceRequest& request,
                                  std::span<const NodeDescriptor> candidates,
                                  const SchedulingPolicy& policy) {
  std::vector<NodeScore> out;
  out.reserve(candidates.size());
  for (const auto& n : candidates) out.push_back({n.node_id, policy.score(request, n)});
  std::sort(out.begin(), out.end(), [](const NodeScore& a, const NodeScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node_id < b.node_id;
  });
  return out;
}

std::vector<NodeScore> rank_nodes(const ResourceRequest& request,
                                  std::span<const NodeDescriptor> candidates) {
  static const LeastAllocatedPolicy kDefault;
  return rank_nodes(request, candidates, kDefault);
}

void ClusterState::add_node(NodeDescriptor node) {
  if (node.cpu_capacity_millicores <= 0 || node.mem_capacity_bytes <= 0) {
    throw Error(Errc::invalid_argument, "node " + node.node_id + " needs positive capacity");
  }
  nodes_[node.node_id] = std::move(node);
}

std::vector<NodeDescriptor> ClusterState::nodes() const {
  std::vector<NodeDescriptor> out;
  out.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) out.push_back(n);
  return out;
}

const NodeDescriptor* ClusterState::node(const std::string& id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const Placement* ClusterState::placement(const std::string& pod) const {
  auto it = placements_.find(pod);
  return it == placements_.end() ? nullptr : &it->second;
}

void ClusterState::place(const std::string& pod, const std::string& node_id,
                         const ResourceRequest& request) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw Error(Errc::not_found, "unknown node " + node_id);
  if (placements_.count(pod)) throw Error(Errc::conflict, "pod " + pod + " already bound");
  if (!fits(request, it->second)) {
    throw Error(Errc::exhausted, "pod " + pod + " does not fit on node " + node_id);
  }
  it->second.allocated_cpu_millicores += request.cpu_millicores;
  it->second.allocated_mem_bytes += request.mem_bytes;
  placements_.emplace(pod, Placement{node_id, request});
}

std::optional<Placement> ClusterState::release(const std::string& pod) {
  auto it = placements_.find(pod);
  if (it == placements_.end()) return std::nullopt;
  Placement p = it->second;
  auto& node = nodes_.at(p.node_id);
  node.allocated_cpu_millicores -= p.request.cpu_millicores;
  node.allocated_mem_bytes -= p.request.mem_bytes;
  placements_.erase(it);
  return p;
}

bool ClusterState::operator==(const ClusterState& o) const {
  if (nodes_ != o.nodes_ || placements_.size() != o.placements_.size()) return false;
  for (const auto& [pod, p] : placements_) {
    auto it = o.placements_.find(pod);
    if (it == o.placements_.end() || it->second.node_id != p.node_id ||
        !(it->second.request == p.request)) {
      return false;
    }
  }
  return true;
}

BindOutcome bind_pod(const std::string& pod_name, const ResourceRequest& request, ClusterState& state,
                 const SchedulingPolicy& policy, Instant now) {
  request.validate();
  const auto nodes = state.nodes();
  const auto feasible = filter_nodes(request, nodes);
  if (feasible.empty()) return BindOutcome{std::nullopt, unschedulable_reason(request, nodes)};
  const auto ranked = rank_nodes(request, feasible, policy);
  const NodeScore& best = ranked.front();
  state.place(pod_name, best.node_id, request);
  return BindOutcome{BindDecision{pod_name, best.node_id, best.score, now}, {}};
}

Scheduler::Scheduler(const Clock& clock, std::unique_ptr<SchedulingPolicy> policy)
    : clock_(clock),
      policy_(policy ? std::move(policy) : std::make_unique<LeastAllocatedPolicy>()) {}

void Scheduler::add_node(NodeDescriptor node) {
  std::lock_guard lock(mu_);
  state_.add_node(std::move(node));
}

BindOutcome Scheduler::submit(const std::string& pod_name, const ResourceRequest& request) {
  std::lock_guard lock(mu_);
  if (state_.placement(pod_name) != nullptr) {
    throw Error(Errc::conflict, "pod " + pod_name + " is already bound");
  }
  BindOutcome out = sched::bind_pod(pod_name, request, state_, *policy_, clock_.now());
  auto it = std::find_if(pending_.begin(), pending_.end(),
                         [&](const PendingPod& p) { return p.pod_name == pod_name; });
  if (out.bound()) {
    if (it != pending_.end()) pending_.erase(it);
  } else if (it == pending_.end()) {
    pending_.push_back({pod_name, request, out.pending_reason, clock_.now()});
  } else {
    it->reason = out.pending_reason;
  }
  return out;
}

std::optional<Placement> Scheduler::unbind(const std::string& pod_name) {
  std::lock_guard lock(mu_);
  std::erase_if(pending_, [&](const PendingPod& p) { return p.pod_name == pod_name; });
  return state_.release(pod_name);
}

std::vector<BindDecision> Scheduler::sweep() {
  std::lock_guard lock(mu_);
  std::vector<BindDecision> bound;
  for (auto it = pending_.begin(); it != pending_.end();) {
    BindOutcome out = sched::bind_pod(it->pod_name, it->request, state_, *policy_, clock_.now());
    if (out.bound()) {
      bound.push_back(*out.decision);
      it = pending_.erase(it);
    } else {
      it->reason = out.pending_reason;
      ++it;
    }
  }
  return bound;
}

ClusterState Scheduler::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<PendingPod> Scheduler::pending() const {
  std::lock_guard lock(mu_);
  return pending_;
}

std::optional<PendingPod> Scheduler::pending(const std::string& pod_name) const {
  std::lock_guard lock(mu_);
  for (const auto& p : pending_) {
    if (p.pod_name == pod_name) return p;
  }
  return std::nullopt;
}

std::string_view to_string(NodeRole role) noexcept {
  return role == NodeRole::worker ? "worker" : "control-plane";
}

}  // namespace podfed::sched
