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

// Acceptance runner: one PASS/FAIL line per primary criterion.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "podfed/api/deployment.hpp"
#include "podfed/ports/index_store.hpp"
#include "podfed/ports/port_manager.hpp"
#include "podfed/sched/scheduler.hpp"
#include "podfed/sim/sim_edge.hpp"
#include "podfed/telemetry/jitter.hpp"
#include "podfed/tunnel/gateway.hpp"
#include "test_support.hpp"

using namespace podfed;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Collects failed checks; the first few are reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (messages_.size() < 3) messages_.push_back(what);
  }
  [[nodiscard]] bool ok() const { return failures_ == 0; }
  [[nodiscard]] Outcome outcome(const std::string& summary) const {
    if (ok()) return {true, summary};
    std::string d = std::to_string(failures_) + " failed check(s): ";
    for (const auto& m : messages_) d += m + "; ";
    return {false, d};
  }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> messages_;
};

// AC1: allocator vs min-free reference over random interleavings.
Outcome port_allocation_oracle() {
  ManualClock clock;
  ports::MemoryIndexStore store;
  ports::NullListenerProbe probe;
  ports::PortManager pm(store, probe, clock, {{"gnuradio", {2200, 6080, 64}}});
  std::mt19937_64 rng(1);
  std::set<std::uint32_t> model;
  Checks c;
  std::size_t allocs = 0, releases = 0, exhausted = 0;
  for (int step = 0; step < 10'000; ++step) {
    const bool do_alloc = model.empty() || (rng() % 100) < 55;
    if (do_alloc) {
      std::uint32_t want = 0;
      while (model.count(want)) ++want;
      try {
        const auto a = pm.allocate("gnuradio", "s" + std::to_string(step));
        ++allocs;
        c.expect(want < 64, "allocated beyond MAX_INDEX");
        c.expect(a.index == want, "step " + std::to_string(step) + ": got " + std::to_string(a.index) +
                                      ", reference " + std::to_string(want));
        c.expect(a.remote_port == 2200 + a.index && a.web_port == 6080 + a.index, "port derivation");
        model.insert(a.index);
      } catch (const Error& e) {
        ++exhausted;
        c.expect(e.code() == Errc::exhausted && model.size() == 64, "unexpected allocation failure");
      }
    } else {
      auto it = model.begin();
      std::advance(it, static_cast<long>(rng() % model.size()));
      c.expect(pm.release(ordinal_name("gnuradio", *it)), "release of a live key returned false");
      model.erase(it);
      ++releases;
    }
    // Full store comparison after every step.
    std::set<std::uint32_t> indices, remote, web;
    const auto entries = pm.entries();
    for (const auto& e : entries) {
      indices.insert(e.index);
      remote.insert(e.remote_port);
      web.insert(e.web_port);
    }
    c.expect(indices.size() == entries.size() && remote.size() == entries.size() && web.size() == entries.size(),
             "duplicate index or port in store");
    c.expect(indices == model, "store differs from reference at step " + std::to_string(step));
  }
  return c.outcome(std::to_string(allocs) + " allocations, " + std::to_string(releases) + " releases, " +
                   std::to_string(exhausted) + " exhausted; store == reference after every step");
}

api::DeploymentOptions headless() {
  api::DeploymentOptions o;
  o.start_http = false;
  o.start_driver = false;
  o.users = testing::test_users();
  return o;
}

// AC2: incremental deployment of 5 pods, ramp then plateau.
Outcome ramp_plateau() {
  ManualClock clock;
  api::ServiceConfig cfg = testing::test_config(21000);
  api::Deployment d(cfg, clock, headless());
  const std::int64_t request = 2 * kGiB;
  const double plateau = static_cast<double>(request);
  const Duration ramp = from_seconds(cfg.ramp_s);
  const Duration gap = std::chrono::seconds{60};

  struct Series {
    std::string node;
    Instant ready{};
    std::vector<std::pair<Instant, std::int64_t>> samples;
  };
  std::map<std::string, Series> pods;
  Checks c;
  for (int k = 0; k < 5; ++k) {
    auto rec = d.lifecycle().provision("fig6-" + std::to_string(k), "gnuradio",
                                       {500, request, {}});
    c.expect(rec.phase == lifecycle::Phase::ready, rec.name + " not Ready: " + rec.reason);
    pods[rec.name] = {rec.node_id.value_or(""), clock.now(), {}};
    // Sample every pod each simulated second until the next deployment.
    const Instant until = clock.now() + gap;
    while (clock.now() < until) {
      clock.advance(std::chrono::seconds{1});
      for (auto& [name, s] : pods) {
        s.samples.emplace_back(clock.now(), d.cluster().agent(s.node).memory(name).value_or(-1));
      }
    }
  }
  // Let the last pod reach its plateau.
  for (int i = 0; i < 300; ++i) {
    clock.advance(std::chrono::seconds{1});
    for (auto& [name, s] : pods) s.samples.emplace_back(clock.now(), d.cluster().agent(s.node).memory(name).value_or(-1));
  }

  std::map<std::string, int> spread;
  double worst_plateau = 0.0;
  for (auto& [name, s] : pods) {
    ++spread[s.node];
    // Ramp: samples 10 s apart strictly increase until the plateau starts.
    std::int64_t prev = -1;
    int ramp_points = 0;
    for (const auto& [t, v] : s.samples) {
      const auto since = t - s.ready;
      if (since > ramp || since.count() % 10'000'000 != 0) continue;
      c.expect(v > prev, name + " ramp not monotone at +" + std::to_string(to_seconds(since)) + " s");
      prev = v;
      ++ramp_points;
    }
    c.expect(ramp_points >= 12, name + " has too few ramp samples");
    // Plateau: every later sample within 5 % of the request, regardless of
    // which pods were deployed meanwhile.
    std::size_t n = 0;
    for (const auto& [t, v] : s.samples) {
      if (t - s.ready < ramp) continue;
      ++n;
      const double dev = std::abs(static_cast<double>(v) - plateau) / plateau;
      worst_plateau = std::max(worst_plateau, dev);
      c.expect(dev <= 0.05, name + " plateau off by " + std::to_string(dev * 100) + " %");
    }
    c.expect(n >= 100, name + " has too few plateau samples");
  }
  std::vector<int> counts;
  for (const auto& [node, k] : spread) counts.push_back(k);
  std::sort(counts.begin(), counts.end());
  c.expect(counts == std::vector<int>{1, 2, 2}, "placement is not 2/2/1");
  std::ostringstream os;
  os << "5 pods on " << spread.size() << " workers, ramps monotone, worst plateau deviation "
     << worst_plateau * 100 << " %";
  return c.outcome(os.str());
}

// AC3: randomized connect(new) / connect(existing) / disconnect.
Outcome reconnect_reuse() {
  ManualClock clock;
  api::ServiceConfig cfg = testing::test_config(22000);
  cfg.pull_delay_s = 0.5;
  api::Deployment d(cfg, clock, headless());
  auto& svc = d.service();
  const std::string token = svc.authenticate("alice", "alice-pw").token;
  const std::int64_t now = unix_seconds(clock.now());
  std::vector<std::string> reservations;
  for (int n = 1; n <= 3; ++n) {
    reservations.push_back(svc.reserve(token, {"", "sdr", "node-" + std::to_string(n),
                                               {"usrp-" + std::to_string(n == 1 ? 1 : n == 2 ? 4 : 7)},
                                               {now - 10, now + 30 * 24 * 3600}})
                               .reservation_id);
  }
  const std::vector<std::string> apps{"gnuradio", "oai"};
  std::mt19937_64 rng(3);
  std::vector<std::string> live;
  Checks c;
  std::size_t reuse_checks = 0, ops = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    const int len = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < len; ++k, ++ops) {
      const int kind = live.empty() ? 0 : static_cast<int>(rng() % 3);
      if (kind == 0 && live.size() < 8) {
        api::ConnectRequest r{reservations[rng() % reservations.size()], apps[rng() % 2], "new"};
        const auto s = svc.connect(token, r);
        c.expect(s.state == api::SessionState::live, "new session not Live: " + s.reason);
        live.push_back(s.session_id);
      } else if (kind == 1 || (kind == 0 && !live.empty())) {
        const std::string sid = live[rng() % live.size()];
        const std::size_t before = d.lifecycle().pod_count();
        const auto s = svc.connect(token, {"", "", sid});
        ++reuse_checks;
        c.expect(d.lifecycle().pod_count() == before, "pod count grew on connect(existing)");
        c.expect(s.state == api::SessionState::live, "reused session not Live");
      } else {
        const std::size_t i = rng() % live.size();
        svc.disconnect(token, live[i]);
        if (rng() % 4 == 0) svc.disconnect(token, live[i]);  // idempotent repeat
        live.erase(live.begin() + static_cast<long>(i));
      }
    }
    c.expect(d.ports().entries().size() == live.size(), "index-store cardinality != live sessions after sequence " +
                                                            std::to_string(seq));
    c.expect(d.lifecycle().pod_count() == live.size(), "pod count != live sessions");
    clock.advance(std::chrono::seconds{1});
  }
  for (const auto& sid : live) svc.disconnect(token, sid);
  const auto counters = svc.counters();
  c.expect(counters == api::ResourceCounters{}, "resources left after final disconnects");
  return c.outcome(std::to_string(ops) + " operations in 1000 sequences, " + std::to_string(reuse_checks) +
                   " reconnects without pod growth; store cardinality == live sessions throughout");
}

// AC4: long idle tunnel with and without keepalives.
struct IdleRun {
  bool registered_after = false;
  bool payload_intact = false;
  std::string expiry;
};

IdleRun idle_tunnel(bool keepalive, std::uint16_t remote_port) {
  ManualClock clock;
  tunnel::GatewayOptions o;
  o.keepalive = {keepalive, std::chrono::seconds{15}, 3};
  o.idle_timeout = std::chrono::seconds{60};  // what an idle NAT/SSH session does
  tunnel::TunnelGateway gw(clock, o);
  IdleRun run;
  gw.on_expired([&run](const tunnel::TunnelRegistration&, const std::string& reason) { run.expiry = reason; });
  sim::PodSandbox pod("idle-0", "gnuradio");
  pod.start_display();
  pod.open_tunnel(gw.control_endpoint(), remote_port);
  for (int i = 0; i < 100; ++i) {
    clock.advance(o.keepalive.interval);
    const Instant now = clock.now();
    if (gw.tick_all(now).size() > 0) break;
    if (keepalive) gw.await_keepalive(remote_port, now);
  }
  run.registered_after = gw.registration(remote_port).has_value();
  const std::string payload = "post-idle payload \x01\x02\xff through the tunnel";
  try {
    run.payload_intact = testing::round_trip(remote_port, payload) == payload;
  } catch (const Error&) {
    run.payload_intact = false;
  }
  return run;
}

Outcome keepalive_persistence() {
  Checks c;
  const IdleRun fixed = idle_tunnel(true, 23001);
  const IdleRun defect = idle_tunnel(false, 23002);
  c.expect(fixed.registered_after, "tunnel dropped with keepalives on: " + fixed.expiry);
  c.expect(fixed.payload_intact, "post-idle payload corrupted or lost with keepalives on");
  c.expect(!defect.registered_after, "tunnel survived idle timeout without keepalives");
  c.expect(!defect.payload_intact, "payload relayed after the tunnel should have dropped");
  return c.outcome("keepalive on: registered, payload intact after 100 intervals; keepalive off: dropped (" +
                   defect.expiry + ")");
}

// AC5: jitter analyzer on the reported profile and against the oracle.
Outcome jitter_analysis() {
  Checks c;
  const auto trace = testing::reported_profile_trace();
  const auto r = telemetry::compute_jitter(trace, 1.75);
  c.expect(std::abs(r.mean_ms - 0.6) <= 0.05, "mean " + std::to_string(r.mean_ms));
  c.expect(r.p95_ms < 1.0, "p95 " + std::to_string(r.p95_ms));
  c.expect(r.spikes.size() == 2, std::to_string(r.spikes.size()) + " spike windows");
  if (r.spikes.size() == 2) {
    c.expect(r.spikes[0].start_s >= 4.0 && r.spikes[0].end_s <= 5.0, "first spike outside 4-5 s");
    c.expect(r.spikes[1].start_s >= 36.0 && r.spikes[1].end_s <= 37.0, "second spike outside 36-37 s");
    for (const auto& s : r.spikes) c.expect(s.peak_ms > 1.75, "spike below threshold");
  }
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto t = testing::random_trace(rng);
    const auto got = telemetry::compute_jitter(t).per_interval_ms;
    const auto want = testing::oracle_jitter_ms(t);
    c.expect(got.size() == want.size(), "interval count mismatch");
    for (std::size_t k = 0; k < std::min(got.size(), want.size()); ++k) {
      worst = std::max(worst, std::abs(got[k] - want[k]));
    }
  }
  c.expect(worst <= 1e-9, "oracle mismatch " + std::to_string(worst) + " ms");
  std::ostringstream os;
  os << "mean " << r.mean_ms << " ms, p95 " << r.p95_ms << " ms, spikes";
  for (const auto& s : r.spikes) os << " [" << s.start_s << ", " << s.end_s << "] s";
  os << "; 1000 random traces, max oracle error " << worst << " ms";
  return c.outcome(os.str());
}

// AC6: scheduler capacity safety, determinism and spread.
Outcome scheduler_properties() {
  Checks c;
  const sched::LeastAllocatedPolicy policy;
  ManualClock clock;
  sched::ClusterState state;
  for (int i = 1; i <= 4; ++i) {
    state.add_node(sched::make_worker("w" + std::to_string(i), 2000 * i, 8 * kGiB * i, {{"zone", i % 2 ? "a" : "b"}}));
  }
  std::mt19937_64 rng(5);
  std::vector<std::string> placed;
  std::size_t binds = 0, rejections = 0;
  for (int step = 0; step < 10'000; ++step) {
    if (!placed.empty() && rng() % 3 == 0) {
      const std::size_t i = rng() % placed.size();
      c.expect(state.release(placed[i]).has_value(), "release of placed pod failed");
      placed.erase(placed.begin() + static_cast<long>(i));
    } else {
      sched::ResourceRequest req{static_cast<std::int64_t>(100 + rng() % 1500),
                                 static_cast<std::int64_t>((1 + rng() % 8) * kGiB / 2),
                                 {}};
      if (rng() % 5 == 0) req.node_selector["zone"] = rng() % 2 ? "a" : "b";
      const std::string pod = "p" + std::to_string(step);
      sched::ClusterState copy = state;
      const auto first = sched::bind_pod(pod, req, copy, policy, clock.now());
      const auto again = sched::bind_pod(pod, req, state, policy, clock.now());
      c.expect(first.decision == again.decision && copy == state, "non-deterministic decision");
      if (again.bound()) {
        placed.push_back(pod);
        ++binds;
      } else {
        ++rejections;
      }
    }
    for (const auto& n : state.nodes()) {
      c.expect(n.allocated_cpu_millicores <= n.cpu_capacity_millicores &&
                   n.allocated_mem_bytes <= n.mem_capacity_bytes && n.allocated_cpu_millicores >= 0 &&
                   n.allocated_mem_bytes >= 0,
               "capacity exceeded on " + n.node_id);
    }
    clock.advance(std::chrono::milliseconds{1});
  }

  sched::Scheduler s(clock);
  for (int i = 1; i <= 3; ++i) s.add_node(sched::make_worker("node-" + std::to_string(i), 4000, 32 * kGiB));
  std::map<std::string, int> spread;
  for (int k = 0; k < 5; ++k) {
    const auto out = s.submit("gnuradio-" + std::to_string(k), {500, 2 * kGiB, {}});
    c.expect(out.bound(), "spread pod not bound");
    if (out.bound()) ++spread[out.decision->node_id];
  }
  c.expect(spread == std::map<std::string, int>{{"node-1", 2}, {"node-2", 2}, {"node-3", 1}},
           "spread is not 2/2/1");
  return c.outcome(std::to_string(binds) + " binds, " + std::to_string(rejections) +
                   " rejections, capacity never exceeded, decisions repeatable; spread node-1:2 node-2:2 node-3:1");
}

// AC7: scale 0 -> 5 -> 3 -> 5 event order.
Outcome scale_reconciliation() {
  ManualClock clock;
  api::ServiceConfig cfg = testing::test_config(24000);
  api::Deployment d(cfg, clock, headless());
  auto& lc = d.lifecycle();
  Checks c;
  const std::string app = "gnuradio";
  auto names = [](const std::vector<sim::LifecycleAction>& acts) {
    std::vector<std::string> out;
    for (const auto& a : acts) out.push_back(a.pod_name);
    return out;
  };
  const auto up = sim::apply_scale({app, 5}, lc);
  const auto down = sim::apply_scale({app, 3}, lc);
  const std::size_t mark = d.events().size();
  const auto up_again = sim::apply_scale({app, 5}, lc);

  const std::vector<std::string> all{"gnuradio-0", "gnuradio-1", "gnuradio-2", "gnuradio-3", "gnuradio-4"};
  c.expect(names(up) == all, "scale-up order");
  c.expect(names(down) == std::vector<std::string>{"gnuradio-4", "gnuradio-3"}, "scale-down order");
  c.expect(names(up_again) == std::vector<std::string>{"gnuradio-3", "gnuradio-4"}, "re-creation order");

  // The event log must tell the same story.
  std::vector<std::string> created, deleted;
  for (const auto& e : d.events().events()) {
    if (e.from.empty()) created.push_back(e.pod);
    if (e.to.empty()) deleted.push_back(e.pod);
  }
  c.expect(created == std::vector<std::string>{"gnuradio-0", "gnuradio-1", "gnuradio-2", "gnuradio-3",
                                               "gnuradio-4", "gnuradio-3", "gnuradio-4"},
           "creation events out of order");
  c.expect(deleted == std::vector<std::string>{"gnuradio-4", "gnuradio-3"}, "deletion events out of order");

  // Each re-created replica ran its startup plan again, tunnel first.
  const auto events = d.events().events();
  for (const std::string pod : {"gnuradio-3", "gnuradio-4"}) {
    std::vector<std::string> steps;
    bool ready = false;
    for (std::size_t i = mark; i < events.size(); ++i) {
      if (events[i].pod != pod) continue;
      if (!events[i].step.empty()) steps.push_back(events[i].step);
      if (events[i].to == "Ready" && events[i].from == "Starting") ready = true;
    }
    c.expect(!steps.empty() && steps.front() == "establish-reverse-tunnel", pod + " did not re-establish its tunnel first");
    c.expect(ready, pod + " did not reach Ready again");
    const auto rec = lc.pod(pod);
    c.expect(rec && d.gateway().registration(rec->ports.remote_port).has_value(), pod + " tunnel not registered");
  }
  c.expect(lc.pod_count() == 5 && d.gateway().registrations().size() == 5, "expected 5 pods with 5 tunnels");
  return c.outcome("create 0..4, terminate 4,3, re-create 3,4 with tunnels re-registered");
}

// AC8: end-to-end over HTTP.
Outcome end_to_end_http() {
  SystemClock clock;
  api::ServiceConfig cfg = testing::test_config(25000);
  cfg.pull_delay_s = 0.05;
  cfg.driver_period_s = 0.2;
  api::DeploymentOptions opts;
  opts.users = testing::test_users();
  api::Deployment d(cfg, clock, opts);
  httplib::Client http("127.0.0.1", d.http()->port());
  http.set_read_timeout(10, 0);
  Checks c;

  auto admin_counters = [&](const std::string& admin) {
    auto r = http.Get("/cluster", {{"Authorization", "Bearer " + admin}});
    if (!r || r->status != 200) return json();
    return json::parse(r->body).at("counters");
  };

  auto auth = http.Post("/auth", R"({"user_id":"alice","password":"alice-pw"})", "application/json");
  c.expect(auth && auth->status == 200, "POST /auth");
  if (!c.ok()) return c.outcome("");
  const std::string token = json::parse(auth->body).at("token");
  const httplib::Headers bearer{{"Authorization", "Bearer " + token}};
  auto admin_auth = http.Post("/auth", R"({"user_id":"root","password":"root-pw"})", "application/json");
  const std::string admin = json::parse(admin_auth->body).at("token");
  const json before = admin_counters(admin);

  const std::int64_t now = unix_seconds(clock.now());
  json rbody = {{"testbed_id", "sdr"}, {"node_id", "node-2"}, {"device_ids", {"usrp-4"}},
                {"start", now - 5}, {"end", now + 3600}};
  auto rsv = http.Post("/reservations", bearer, rbody.dump(), "application/json");
  c.expect(rsv && rsv->status == 201, "POST /reservations");
  if (!c.ok()) return c.outcome("");
  const std::string rid = json::parse(rsv->body).at("reservation_id");

  auto conn = http.Post("/sessions", bearer, json{{"reservation_id", rid}, {"app", "gnuradio"}}.dump(),
                        "application/json");
  c.expect(conn && (conn->status == 200 || conn->status == 202), "POST /sessions");
  if (!c.ok()) return c.outcome("");
  json session = json::parse(conn->body);
  const std::string sid = session.at("session_id");
  for (int i = 0; i < 50 && session.at("state") != "Live"; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds{100});
    auto again = http.Post("/sessions", bearer, json{{"instance", sid}}.dump(), "application/json");
    if (again) session = json::parse(again->body);
  }
  c.expect(session.at("state") == "Live", "session never went Live");
  if (!c.ok()) return c.outcome("");
  const std::string pod = session.at("pod_name");
  const auto web_port = session.at("web_port").get<std::uint16_t>();

  const std::string payload(100'000, 'x');
  std::string bytes = payload;
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>('A' + (i * 7919) % 53);
  c.expect(testing::round_trip(web_port, bytes) == bytes, "byte round-trip through the web bridge");
  const std::string page = testing::round_trip(web_port, "GET / HTTP/1.0\r\n\r\n");
  c.expect(page.find(pod) != std::string::npos, "bridge page does not name the pod");

  auto metrics = http.Get("/metrics");
  c.expect(metrics && metrics->status == 200, "GET /metrics");
  const std::string series = "pod_memory_bytes{app=\"gnuradio\",node=\"node-2\",pod=\"" + pod + "\"}";
  c.expect(metrics && metrics->body.find(series) != std::string::npos, "metrics lack " + series);

  auto del = http.Delete("/sessions/" + sid, bearer);
  c.expect(del && del->status == 200 && json::parse(del->body).at("state") == "Closed", "DELETE /sessions");
  const json after = admin_counters(admin);
  c.expect(!before.is_null() && before == after, "counters not restored: " + before.dump() + " vs " + after.dump());
  return c.outcome("auth, reserve, connect (" + pod + " on node-2), 100 kB round-trip, /metrics series, "
                   "disconnect; counters restored " + after.dump());
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  struct Criterion {
    const char* id;
    const char* title;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "port allocation matches min-free reference", 10, port_allocation_oracle},
      {"AC2", "memory ramp then plateau for 5 pods", 5, ramp_plateau},
      {"AC3", "reconnect reuses pods, store tracks sessions", 10, reconnect_reuse},
      {"AC4", "keepalive keeps idle tunnels; idle timeout drops them", 5, keepalive_persistence},
      {"AC5", "jitter statistics and oracle agreement", 10, jitter_analysis},
      {"AC6", "scheduler safety, determinism, 2/2/1 spread", 10, scheduler_properties},
      {"AC7", "scale 0->5->3->5 ordinal order", 5, scale_reconciliation},
      {"AC8", "end-to-end HTTP flow", 30, end_to_end_http},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < cr.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s  %s  (%.2f s, limit %.0f s)  %s%s\n", cr.id, pass ? "PASS" : "FAIL", cr.title, secs,
                cr.limit_s, in_time ? "" : "[over time] ", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
