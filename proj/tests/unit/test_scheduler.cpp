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

#include <random>

#include <gtest/gtest.h>

#include "podfed/common/error.hpp"
#include "podfed/sched/scheduler.hpp"

using namespace podfed;
using namespace podfed::sched;

namespace {

// Least-allocated score written out from its definition.
double oracle_score(std::int64_t cap_cpu, std::int64_t used_cpu, std::int64_t cap_mem, std::int64_t used_mem,
                    std::int64_t req_cpu, std::int64_t req_mem) {
  const double c = double(cap_cpu - used_cpu - req_cpu) / double(cap_cpu);
  const double m = double(cap_mem - used_mem - req_mem) / double(cap_mem);
  return (c + m) / 2;
}

NodeDescriptor loaded(const std::string& id, std::int64_t cpu_used, std::int64_t mem_used) {
  NodeDescriptor n = make_worker(id, 4000, 32 * kGiB);
  n.allocated_cpu_millicores = cpu_used;
  n.allocated_mem_bytes = mem_used;
  return n;
}

}  // namespace

TEST(Filter, KeepsFittingWorkersInInputOrder) {
  NodeDescriptor cp = make_worker("cp", 8000, 64 * kGiB);
  cp.role = NodeRole::control_plane;
  const std::vector<NodeDescriptor> nodes{
      loaded("b", 3600, 0), make_worker("a", 4000, 32 * kGiB, {{"gpu", "yes"}}), cp,
      loaded("c", 0, 31 * kGiB), make_worker("d", 4000, 32 * kGiB)};
  const ResourceRequest req{500, 2 * kGiB, {}};
  const auto out = filter_nodes(req, nodes);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].node_id, "a");
  EXPECT_EQ(out[1].node_id, "d");

  const ResourceRequest gpu{500, 2 * kGiB, {{"gpu", "yes"}}};
  const auto only_a = filter_nodes(gpu, nodes);
  ASSERT_EQ(only_a.size(), 1u);
  EXPECT_EQ(only_a[0].node_id, "a");
}

TEST(Filter, ExactFitIsAccepted) {
  const std::vector<NodeDescriptor> nodes{loaded("a", 3500, 30 * kGiB)};
  EXPECT_EQ(filter_nodes({500, 2 * kGiB, {}}, nodes).size(), 1u);
  EXPECT_EQ(filter_nodes({501, 2 * kGiB, {}}, nodes).size(), 0u);
}

TEST(Score, MatchesDefinition) {
  const LeastAllocatedPolicy p;
  // 1000m/4G used and 500m/8G used, on 4000m/32G, request 500m/2G: both 0.71875.
  EXPECT_DOUBLE_EQ(p.score({500, 2 * kGiB, {}}, loaded("x", 1000, 4 * kGiB)), 0.71875);
  EXPECT_DOUBLE_EQ(p.score({500, 2 * kGiB, {}}, loaded("y", 500, 8 * kGiB)), 0.71875);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t cap_cpu = 1000 + rng() % 64000, cap_mem = kGiB + rng() % (256 * kGiB);
    const std::int64_t used_cpu = rng() % cap_cpu, used_mem = rng() % cap_mem;
    const std::int64_t req_cpu = 1 + rng() % (cap_cpu - used_cpu), req_mem = 1 + rng() % (cap_mem - used_mem);
    NodeDescriptor n = make_worker("n", cap_cpu, cap_mem);
    n.allocated_cpu_millicores = used_cpu;
    n.allocated_mem_bytes = used_mem;
    const double s = p.score({req_cpu, req_mem, {}}, n);
    EXPECT_NEAR(s, oracle_score(cap_cpu, used_cpu, cap_mem, used_mem, req_cpu, req_mem), 1e-12);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Rank, DescendingWithIdTieBreak) {
  const std::vector<NodeDescriptor> nodes{loaded("node-c", 0, 0), loaded("node-b", 1000, 4 * kGiB),
                                          loaded("node-a", 500, 8 * kGiB)};
  const auto ranked = rank_nodes({500, 2 * kGiB, {}}, nodes);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].node_id, "node-c");
  EXPECT_EQ(ranked[1].node_id, "node-a");  // tied at 0.71875 with node-b
  EXPECT_EQ(ranked[2].node_id, "node-b");
  EXPECT_EQ(ranked[1].score, ranked[2].score);
}

TEST(Bind, PlacesOnTopNodeOrLeavesStateUntouched) {
  ManualClock clock;
  ClusterState state;
  state.add_node(make_worker("n1", 1000, 4 * kGiB));
  state.add_node(make_worker("n2", 2000, 8 * kGiB));
  const LeastAllocatedPolicy p;
  const auto ok = bind_pod("pod-a", {500, kGiB, {}}, state, p, clock.now());
  ASSERT_TRUE(ok.bound());
  EXPECT_EQ(ok.decision->node_id, "n2");
  EXPECT_EQ(state.node("n2")->allocated_cpu_millicores, 500);
  EXPECT_EQ(state.placement("pod-a")->node_id, "n2");

  const ClusterState before = state;
  const auto no = bind_pod("pod-b", {5000, kGiB, {}}, state, p, clock.now());
  EXPECT_FALSE(no.bound());
  EXPECT_NE(no.pending_reason.find("Insufficient cpu"), std::string::npos);
  EXPECT_EQ(state, before);
}

TEST(ClusterState, RejectsOverCommitAndDoublePlacement) {
  ClusterState s;
  s.add_node(make_worker("n1", 1000, 4 * kGiB));
  s.place("a", "n1", {600, kGiB, {}});
  EXPECT_THROW(s.place("b", "n1", {600, kGiB, {}}), Error);
  EXPECT_THROW(s.place("a", "n1", {100, kGiB, {}}), Error);
  EXPECT_EQ(s.release("a")->request.cpu_millicores, 600);
  EXPECT_FALSE(s.release("a").has_value());
  EXPECT_EQ(s.node("n1")->allocated_cpu_millicores, 0);
}

TEST(Scheduler, SpreadsFivePodsTwoTwoOne) {
  ManualClock clock;
  Scheduler s(clock);
  for (int i = 1; i <= 3; ++i) s.add_node(make_worker("node-" + std::to_string(i), 4000, 32 * kGiB));
  std::vector<std::string> placed;
  for (int k = 0; k < 5; ++k) placed.push_back(s.submit("p" + std::to_string(k), {500, 2 * kGiB, {}}).decision->node_id);
  EXPECT_EQ(placed, (std::vector<std::string>{"node-1", "node-2", "node-3", "node-1", "node-2"}));
}

TEST(Scheduler, PendingQueueDrainsInArrivalOrder) {
  ManualClock clock;
  Scheduler s(clock);
  s.add_node(make_worker("n1", 1000, 8 * kGiB));
  ASSERT_TRUE(s.submit("a", {1000, kGiB, {}}).bound());
  const auto b = s.submit("b", {600, kGiB, {}});
  const auto c = s.submit("c", {400, kGiB, {}});
  EXPECT_FALSE(b.bound());
  EXPECT_FALSE(c.bound());
  ASSERT_EQ(s.pending().size(), 2u);
  EXPECT_EQ(s.pending()[0].pod_name, "b");
  EXPECT_NE(s.pending("b")->reason.find("0/1 workers available"), std::string::npos);

  EXPECT_TRUE(s.sweep().empty());
  s.unbind("a");
  const auto bound = s.sweep();
  ASSERT_EQ(bound.size(), 2u);
  EXPECT_EQ(bound[0].pod_name, "b");
  EXPECT_EQ(bound[1].pod_name, "c");
  EXPECT_TRUE(s.pending().empty());
}

TEST(Scheduler, UnbindDropsPendingEntry) {
  ManualClock clock;
  Scheduler s(clock);
  s.add_node(make_worker("n1", 1000, kGiB));
  (void)s.submit("big", {2000, kGiB, {}});
  ASSERT_TRUE(s.pending("big").has_value());
  EXPECT_FALSE(s.unbind("big").has_value());
  EXPECT_FALSE(s.pending("big").has_value());
}

TEST(Scheduler, SelectorMismatchIsExplained) {
  ManualClock clock;
  Scheduler s(clock);
  s.add_node(make_worker("n1", 4000, 8 * kGiB, {{"node", "n1"}}));
  const auto out = s.submit("p", {500, kGiB, {{"node", "n2"}}});
  EXPECT_FALSE(out.bound());
  EXPECT_NE(out.pending_reason.find("node selector"), std::string::npos);
}

TEST(Scheduler, RejectsInvalidRequest) {
  ManualClock clock;
  Scheduler s(clock);
  s.add_node(make_worker("n1", 4000, 8 * kGiB));
  EXPECT_THROW((void)s.submit("p", {0, kGiB, {}}), Error);
}

// Randomized bind/unbind: never over capacity; identical state and request
// always produce the identical decision.
TEST(SchedulerProperty, CapacityAndDeterminism) {
  ManualClock clock;
  const LeastAllocatedPolicy p;
  ClusterState state;
  for (int i = 0; i < 5; ++i) state.add_node(make_worker("w" + std::to_string(i), 1000 * (i + 1), kGiB * (i + 2)));
  std::mt19937_64 rng(77);
  std::vector<std::string> live;
  for (int step = 0; step < 10'000; ++step) {
    if (!live.empty() && rng() % 3 == 0) {
      const auto i = rng() % live.size();
      ASSERT_TRUE(state.release(live[i]).has_value());
      live.erase(live.begin() + static_cast<long>(i));
      continue;
    }
    const ResourceRequest req{static_cast<std::int64_t>(1 + rng() % 1200),
                              static_cast<std::int64_t>(1 + rng() % (2 * kGiB)), {}};
    ClusterState twin = state;
    const std::string name = "p" + std::to_string(step);
    const auto a = bind_pod(name, req, state, p, clock.now());
    const auto b = bind_pod(name, req, twin, p, clock.now());
    ASSERT_EQ(a.decision, b.decision);
    ASSERT_EQ(state, twin);
    if (a.bound()) live.push_back(name);
    for (const auto& n : state.nodes()) {
      ASSERT_LE(n.allocated_cpu_millicores, n.cpu_capacity_millicores);
      ASSERT_LE(n.allocated_mem_bytes, n.mem_capacity_bytes);
    }
    // Nothing fits only when the filter agrees.
    if (!a.bound()) {
      const auto nodes = state.nodes();
      ASSERT_TRUE(filter_nodes(req, nodes).empty());
    }
  }
}
