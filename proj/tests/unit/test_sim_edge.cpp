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

#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "podfed/common/error.hpp"
#include "podfed/sim/sim_edge.hpp"
#include "test_support.hpp"

using namespace podfed;
using namespace podfed::sim;
using podfed::testing::round_trip;
using namespace std::chrono_literals;

namespace {

constexpr std::uint16_t kRemote = 26400;

MemRampModel ramp(double noise) {
  return MemRampModel{2 * kGiB, 120s, from_unix_seconds(1'000), noise, 42, "gnuradio-0"};
}

std::optional<Errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

class FakeController final : public ReplicaController {
 public:
  std::set<std::uint32_t> live;
  int fail_after = -1;  // creates allowed before throwing; -1 never throws
  std::vector<std::string> calls;

  std::vector<std::uint32_t> live_ordinals(const std::string&) override { return {live.begin(), live.end()}; }
  std::string create_replica(const std::string& app) override {
    if (fail_after == 0) throw Error(Errc::unavailable, "no capacity");
    if (fail_after > 0) --fail_after;
    std::uint32_t i = 0;
    while (live.count(i)) ++i;
    live.insert(i);
    calls.push_back("create " + ordinal_name(app, i));
    return ordinal_name(app, i);
  }
  void terminate_replica(const std::string& pod) override { calls.push_back("terminate " + pod); }
};

}  // namespace

TEST(MemRamp, NoiseFreeShape) {
  const MemRampModel m = ramp(0.0);
  const Instant t0 = m.t0;
  EXPECT_EQ(m.sample(t0 - 5s), 0);
  EXPECT_EQ(m.sample(t0), 0);
  EXPECT_EQ(m.sample(t0 + 30s), kGiB / 2);
  EXPECT_EQ(m.sample(t0 + 60s), kGiB);
  EXPECT_EQ(m.sample(t0 + 120s), 2 * kGiB);
  EXPECT_EQ(m.sample(t0 + 1h), 2 * kGiB);
}

TEST(MemRamp, NoiseStaysInBandAndIsDeterministic) {
  const MemRampModel a = ramp(0.02), b = ramp(0.02);
  MemRampModel other = ramp(0.02);
  other.pod = "gnuradio-1";
  double sum = 0;
  int differs = 0;
  const int n = 20'000;
  for (int i = 1; i <= n; ++i) {
    const Instant t = a.t0 + std::chrono::milliseconds{i * 37};
    const double exp = a.expected(t);
    const double s = static_cast<double>(a.sample(t));
    ASSERT_GE(s, exp * 0.98 - 1);
    ASSERT_LE(s, exp * 1.02 + 1);
    ASSERT_EQ(a.sample(t), b.sample(t));
    ASSERT_LE(std::fabs(a.epsilon(t)), 0.02);
    sum += a.epsilon(t);
    differs += a.epsilon(t) != other.epsilon(t) ? 1 : 0;
  }
  EXPECT_LT(std::fabs(sum / n), 0.001);
  EXPECT_GT(differs, n * 9 / 10);
}

TEST(SimClusterSpec, Validation) {
  EXPECT_NO_THROW(SimClusterSpec::desk_scale().validate());
  SimClusterSpec s = SimClusterSpec::desk_scale();
  s.noise_fraction = 0.1;
  EXPECT_THROW(s.validate(), Error);
  s = SimClusterSpec::desk_scale();
  s.workers.clear();
  EXPECT_THROW(s.validate(), Error);
  s = SimClusterSpec::desk_scale();
  s.ramp_duration = 0s;
  EXPECT_THROW(s.validate(), Error);
  s = SimClusterSpec::desk_scale();
  s.workers[1].role = sched::NodeRole::control_plane;
  EXPECT_THROW(s.validate(), Error);
}

TEST(PodSandbox, ServesBannerAndEchoes) {
  PodSandbox box("gnuradio-3", "gnuradio");
  box.start_display();
  const std::string page = round_trip(box.display_endpoint().port, "GET / HTTP/1.1\r\nHost: pod\r\n\r\n");
  EXPECT_EQ(page.rfind("HTTP/1.1 200 OK", 0), 0u);
  EXPECT_NE(page.find("pod=gnuradio-3"), std::string::npos);
  EXPECT_NE(page.find("desktop=starting"), std::string::npos);
  box.start_desktop();
  EXPECT_NE(box.banner().find("desktop=running"), std::string::npos);
  const std::string blob(50'000, '\x5a');
  EXPECT_EQ(round_trip(box.display_endpoint().port, blob), blob);
  box.stop();
  EXPECT_FALSE(box.display_running());
  EXPECT_FALSE(box.desktop_running());
}

class NodeAgentTest : public ::testing::Test {
 protected:
  ManualClock clock;
  SimClusterSpec spec = SimClusterSpec::desk_scale();
  tunnel::TunnelGateway gw{clock};
  NodeAgent agent{clock, spec.workers[0], spec};

  PodSpec pod(const std::string& name, std::uint32_t index = 0) {
    return PodSpec{name, "gnuradio", "podfed/gnuradio-desktop:latest", {500, 2 * kGiB, {}},
                   {index, static_cast<std::uint16_t>(kRemote + index), static_cast<std::uint16_t>(26500 + index)}};
  }
  void bind(const std::string& name, std::uint32_t index = 0) {
    agent.accept_bind({name, "node-1", 0.5, clock.now()}, pod(name, index));
  }
  void start(const std::string& name) {
    agent.start_sandbox(name);
    for (auto step : {StartupStep::establish_tunnel, StartupStep::start_display, StartupStep::start_desktop}) {
      (void)agent.run_step(name, step, gw.control_endpoint(), 30s);
    }
    agent.mark_running(name);
  }
};

TEST_F(NodeAgentTest, BindGuards) {
  bind("p0");
  EXPECT_EQ(code_of([&] { bind("p0"); }), Errc::conflict);
  EXPECT_EQ(code_of([&] { agent.accept_bind({"p1", "node-2", 0.5, clock.now()}, pod("p1")); }),
            Errc::invalid_argument);
  agent.set_draining(true);
  EXPECT_EQ(code_of([&] { bind("p2"); }), Errc::unavailable);
  EXPECT_TRUE(agent.report_status().draining);
}

TEST_F(NodeAgentTest, PullCachesPerImage) {
  bind("p0");
  bind("p1", 1);
  const Instant before = clock.now();
  EXPECT_EQ(agent.pull("p0"), spec.pull_delay);
  EXPECT_EQ(clock.now() - before, spec.pull_delay);
  EXPECT_TRUE(agent.image_cached("podfed/gnuradio-desktop:latest"));
  EXPECT_EQ(agent.pull("p1"), Duration::zero());
}

TEST_F(NodeAgentTest, StartupRunsAllProcesses) {
  bind("p0");
  start("p0");
  PodSandbox* box = agent.sandbox("p0");
  ASSERT_NE(box, nullptr);
  EXPECT_TRUE(box->tunnel_alive());
  EXPECT_TRUE(box->display_running());
  EXPECT_TRUE(box->desktop_running());
  EXPECT_TRUE(gw.registration(kRemote).has_value());
  EXPECT_TRUE(agent.probe_liveness("p0"));
  EXPECT_TRUE(agent.probe_readiness("p0"));
  const std::string page = round_trip(kRemote, "GET / HTTP/1.0\r\n\r\n");
  EXPECT_NE(page.find("pod=p0"), std::string::npos);
}

TEST_F(NodeAgentTest, StepFaults) {
  bind("p0");
  agent.start_sandbox("p0");
  FaultPlan f;
  f.step_delay[StartupStep::establish_tunnel] = 40s;
  f.step_failures.insert(StartupStep::start_display);
  agent.inject("p0", f);
  const Instant before = clock.now();
  EXPECT_EQ(code_of([&] { (void)agent.run_step("p0", StartupStep::establish_tunnel, gw.control_endpoint(), 30s); }),
            Errc::timeout);
  EXPECT_EQ(clock.now() - before, 40s);
  EXPECT_EQ(code_of([&] { (void)agent.run_step("p0", StartupStep::start_display, gw.control_endpoint(), 30s); }),
            Errc::io);
  EXPECT_FALSE(agent.sandbox("p0")->display_running());
  agent.mark_failed("p0");
  EXPECT_EQ(agent.sandbox("p0"), nullptr);
  EXPECT_EQ(agent.report_status().pods.at(0).state, "failed");
}

TEST_F(NodeAgentTest, ProbeFaultsAndTunnelLoss) {
  bind("p0");
  start("p0");
  FaultPlan f;
  f.liveness_failures = 2;
  f.readiness_failures = 1;
  agent.inject("p0", f);
  EXPECT_FALSE(agent.probe_liveness("p0"));
  EXPECT_FALSE(agent.probe_liveness("p0"));
  EXPECT_TRUE(agent.probe_liveness("p0"));
  EXPECT_FALSE(agent.probe_readiness("p0"));
  EXPECT_TRUE(agent.probe_readiness("p0"));
  agent.sandbox("p0")->kill_tunnel();
  EXPECT_FALSE(agent.probe_liveness("p0"));
  EXPECT_FALSE(agent.probe_liveness("missing"));
}

TEST_F(NodeAgentTest, StatusReportsRampAndMonotoneTimestamps) {
  bind("p0");
  bind("p1", 1);
  start("p0");
  clock.advance(60s);
  const auto mem = agent.memory("p0");
  ASSERT_TRUE(mem.has_value());
  EXPECT_NEAR(static_cast<double>(*mem), static_cast<double>(kGiB), 0.021 * kGiB);

  NodeStatus s = agent.report_status();
  EXPECT_EQ(s.node_id, "node-1");
  EXPECT_EQ(s.allocated_cpu_millicores, 1000);
  EXPECT_EQ(s.allocated_mem_bytes, 4 * kGiB);
  EXPECT_EQ(s.measured_mem_bytes, *mem);  // p1 never started
  Instant last = s.timestamp;
  for (int i = 0; i < 50; ++i) {
    const NodeStatus next = agent.report_status();
    ASSERT_GT(next.timestamp, last);
    last = next.timestamp;
  }
  const nlohmann::json j = to_json(s);
  EXPECT_EQ(j.at("node_id"), "node-1");
  EXPECT_EQ(j.at("pods").size(), 2u);
}

TEST_F(NodeAgentTest, RestartResetsRamp) {
  bind("p0");
  start("p0");
  clock.advance(200s);
  EXPECT_GT(*agent.memory("p0"), kGiB);
  agent.start_sandbox("p0");
  EXPECT_EQ(*agent.memory("p0"), 0);
  agent.remove("p0");
  EXPECT_FALSE(agent.has_pod("p0"));
}

TEST(SimCluster, AgentsAndScaleRecord) {
  ManualClock clock;
  SimCluster c(clock, SimClusterSpec::desk_scale());
  EXPECT_EQ(c.worker_ids(), (std::vector<std::string>{"node-1", "node-2", "node-3"}));
  EXPECT_EQ(c.nodes().size(), 4u);
  EXPECT_EQ(code_of([&] { (void)c.agent("node-9"); }), Errc::not_found);
  EXPECT_EQ(c.desired_replicas("gnuradio"), 0u);
  c.note_scale({"gnuradio", 3});
  c.note_scale({"gnuradio", 2});
  c.note_scale({"oai", 1});
  EXPECT_EQ(c.desired_replicas("gnuradio"), 3u);
  EXPECT_EQ(c.desired_replicas("oai"), 1u);
  EXPECT_EQ(c.report_status().size(), 3u);
}

TEST(ApplyScale, GrowsAtLowestFreeOrdinals) {
  FakeController ctl;
  ctl.live = {1};
  const auto actions = apply_scale({"oai", 3}, ctl);
  const std::vector<LifecycleAction> want{{LifecycleAction::Kind::create, ordinal_name("oai", 0)},
                                          {LifecycleAction::Kind::create, ordinal_name("oai", 2)}};
  EXPECT_EQ(actions, want);
}

TEST(ApplyScale, ShrinksHighestFirst) {
  FakeController ctl;
  ctl.live = {0, 1, 2, 5};
  const auto actions = apply_scale({"oai", 2}, ctl);
  EXPECT_EQ(ctl.calls, (std::vector<std::string>{"terminate " + ordinal_name("oai", 5),
                                                 "terminate " + ordinal_name("oai", 2)}));
  EXPECT_EQ(actions.size(), 2u);
}

TEST(ApplyScale, StopsOnProvisioningFailure) {
  FakeController ctl;
  ctl.fail_after = 1;
  const auto actions = apply_scale({"oai", 4}, ctl);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].pod_name, ordinal_name("oai", 0));
}

TEST(ApplyScale, SteadyStateIsNoop) {
  FakeController ctl;
  ctl.live = {0, 1};
  EXPECT_TRUE(apply_scale({"oai", 2}, ctl).empty());
  EXPECT_TRUE(ctl.calls.empty());
}
