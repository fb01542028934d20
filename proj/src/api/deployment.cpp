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

#include "podfed/api/deployment.hpp"

#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace podfed::api {
namespace {

using nlohmann::json;

lifecycle::LifecycleOptions lifecycle_options(const ServiceConfig& c) {
  lifecycle::LifecycleOptions o;
  o.plan.step_timeout = from_seconds(c.step_timeout_s);
  o.probes.readiness_period = from_seconds(c.readiness_period_s);
  o.probes.liveness_period = from_seconds(c.liveness_period_s);
  o.probes.failure_threshold = c.failure_threshold;
  o.sweep_period = from_seconds(c.sweep_period_s);
  for (const auto& [app, range] : c.app_ranges()) {
    (void)range;
    o.apps[app] = {"podfed/" + app + "-desktop:latest", {c.app_cpu_millicores, c.app_mem_bytes, {}}};
  }
  return o;
}

sim::SimClusterSpec cluster_spec(const ServiceConfig& c, const reservation::Inventory& inv) {
  sim::SimClusterSpec s;
  for (const auto& n : inv.nodes()) {
    Labels labels = n.labels;
    labels["node"] = n.node_id;
    s.workers.push_back(sched::make_worker(n.node_id, n.cpu_millicores, n.mem_bytes, labels));
  }
  s.control_plane.node_id = "control-plane";
  s.control_plane.role = sched::NodeRole::control_plane;
  s.control_plane.cpu_capacity_millicores = 4000;
  s.control_plane.mem_capacity_bytes = 16 * kGiB;
  s.ramp_duration = from_seconds(c.ramp_s);
  s.noise_fraction = c.noise_fraction;
  s.pull_delay = from_seconds(c.pull_delay_s);
  s.seed = c.seed;
  return s;
}

}  // namespace

json default_inventory() {
  json nodes = json::array();
  for (int i = 1; i <= 3; ++i) {
    nodes.push_back({{"node_id", "node-" + std::to_string(i)},
                     {"cpu_millicores", 4000},
                     {"mem_bytes", 32 * kGiB},
                     {"labels", {{"cpu", "xeon-e2124"}}}});
  }
  json devices = json::array();
  for (int i = 1; i <= 8; ++i) {
    const int col = (i - 1) % 4, row = (i - 1) / 4;
    const double x = std::round((0.15 + 0.7 * col / 3.0) * 1000) / 1000;
    devices.push_back({{"device_id", "usrp-" + std::to_string(i)},
                       {"kind", "radio-transceiver"},
                       {"model", "USRP N210"},
                       {"node_id", "node-" + std::to_string(i <= 3 ? 1 : i <= 6 ? 2 : 3)},
                       {"layout_pos", {x, row == 0 ? 0.3 : 0.7}}});
  }
  return {{"labs",
           {{{"lab_id", "x-lab"},
             {"name", "X Lab"},
             {"testbeds",
              {{{"testbed_id", "sdr"}, {"name", "SDR testbed"}, {"nodes", nodes}, {"devices", devices}}}}}}}};
}

Deployment::Deployment(ServiceConfig config, Clock& clock, DeploymentOptions options)
    : config_(std::move(config)), clock_(clock) {
  config_.validate();
  if (options.inventory) {
    inventory_ = std::move(*options.inventory);
  } else if (!config_.inventory_file.empty()) {
    inventory_ = reservation::Inventory::load(config_.inventory_file);
  } else {
    inventory_ = reservation::Inventory::from_json(default_inventory());
  }
  UserStore users;
  if (options.users) {
    users = std::move(*options.users);
  } else if (!config_.users_file.empty()) {
    users = UserStore::load(config_.users_file);
  } else {
    spdlog::warn("no users file configured; every login will be rejected");
  }

  if (config_.store == "memory") {
    store_ = std::make_unique<ports::MemoryIndexStore>();
  } else {
    store_ = std::make_unique<ports::RemoteIndexStore>(net::parse_endpoint(config_.store));
  }

  tunnel::GatewayOptions gw;
  gw.bind_host = config_.gateway_host;
  gw.control_port = config_.tunnel_control_port;
  gw.keepalive = {config_.keepalive_enabled, from_seconds(config_.keepalive_interval_s),
                  config_.keepalive_max_missed};
  if (config_.idle_timeout_s > 0) gw.idle_timeout = from_seconds(config_.idle_timeout_s);
  gateway_ = std::make_unique<tunnel::TunnelGateway>(clock_, gw);
  gateway_->on_expired([](const tunnel::TunnelRegistration& t, const std::string& reason) {
    spdlog::warn("tunnel for {} on port {} expired: {}", t.pod_name, t.remote_port, reason);
  });

  cluster_ = std::make_unique<sim::SimCluster>(clock_, cluster_spec(config_, inventory_));
  scheduler_ = std::make_unique<sched::Scheduler>(clock_);
  for (auto& n : cluster_->nodes()) scheduler_->add_node(std::move(n));

  ports_ = std::make_unique<ports::PortManager>(
      *store_, *gateway_, clock_, config_.app_ranges(),
      [this](const ScaleSignal& s) { cluster_->note_scale(s); });
  gateway_->set_authorizer([this](const std::string& pod, std::uint16_t remote_port) {
    const auto entry = ports_->lookup_key(pod);
    return entry && entry->remote_port == remote_port;
  });

  std::optional<std::filesystem::path> journal;
  if (!config_.journal_file.empty()) journal = config_.journal_file;
  book_ = std::make_unique<reservation::ReservationBook>(inventory_, clock_, journal);
  events_ = config_.event_log_file.empty()
                ? std::make_unique<lifecycle::EventLog>()
                : std::make_unique<lifecycle::EventLog>(config_.event_log_file);
  lifecycle_ = std::make_unique<lifecycle::PodLifecycle>(clock_, *scheduler_, *ports_, *gateway_, *cluster_,
                                                         *events_, lifecycle_options(config_), &metrics_);
  auth_ = std::make_unique<Authenticator>(clock_, std::move(users), std::chrono::seconds{config_.token_ttl_s},
                                          from_seconds(config_.login_throttle_s));
  service_ = std::make_unique<FederationService>(
      clock_, *auth_, inventory_, *book_, *lifecycle_, *scheduler_, *ports_, *gateway_, *cluster_, metrics_,
      ServiceOptions{config_.upload_dir, config_.upload_max_bytes});

  if (options.start_http) {
    http_ = std::make_unique<HttpGateway>(*service_, config_.http_host, config_.http_port,
                                          config_.upload_max_bytes);
  }
  if (options.start_driver) driver_ = std::thread([this] { driver_loop(); });
}

Deployment::~Deployment() { stop(); }

void Deployment::tick() {
  lifecycle_->tick();
  service_->refresh();
}

void Deployment::driver_loop() {
  const auto period = std::chrono::duration_cast<std::chrono::milliseconds>(from_seconds(config_.driver_period_s));
  std::unique_lock lock(driver_mu_);
  while (!driver_cv_.wait_for(lock, period, [this] { return stopping_; })) {
    lock.unlock();
    try {
      tick();
    } catch (const std::exception& e) {
      spdlog::error("driver tick failed: {}", e.what());
    }
    lock.lock();
  }
}

void Deployment::stop() {
  {
    std::lock_guard lock(driver_mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  driver_cv_.notify_all();
  if (driver_.joinable()) driver_.join();
  if (http_) http_->stop();
  // Tear pods down so sandboxes and tunnels close before the gateway does.
  for (const auto& p : lifecycle_->pods()) {
    try {
      lifecycle_->terminate_pod(p.name);
    } catch (const std::exception& e) {
      spdlog::warn("teardown of {} failed: {}", p.name, e.what());
    }
  }
  gateway_->stop();
}

}  // namespace podfed::api
