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

#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include <nlohmann/json_fwd.hpp>

#include "podfed/api/auth.hpp"
#include "podfed/api/config.hpp"
#include "podfed/api/http_gateway.hpp"
#include "podfed/api/service.hpp"
#include "podfed/lifecycle/lifecycle.hpp"
#include "podfed/ports/index_store.hpp"
#include "podfed/reservation/inventory.hpp"
#include "podfed/reservation/reservation_book.hpp"
#include "podfed/sched/scheduler.hpp"
#include "podfed/sim/sim_edge.hpp"
#include "podfed/telemetry/metrics.hpp"
#include "podfed/tunnel/gateway.hpp"

namespace podfed::api {

/// One lab with one testbed: three 4-core / 32 GiB edge nodes and eight
/// radios. Used when no inventory file is configured.
[[nodiscard]] nlohmann::json default_inventory();

struct DeploymentOptions {
  bool start_http = true;
  /// Background thread calling tick() every driver_period_s.
  bool start_driver = true;
  /// Overrides for config.inventory_file / config.users_file.
  std::optional<reservation::Inventory> inventory;
  std::optional<UserStore> users;
};

/// Composition root: builds every module from a ServiceConfig and wires
/// them together (store -> gateway -> cluster -> scheduler -> ports ->
/// reservations -> lifecycle -> service -> HTTP).
class Deployment {
 public:
  Deployment(ServiceConfig config, Clock& clock, DeploymentOptions options = {});
  ~Deployment();
  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  /// Lifecycle driver step plus session refresh.
  void tick();
  void stop();

  [[nodiscard]] const ServiceConfig& config() const { return config_; }
  [[nodiscard]] FederationService& service() { return *service_; }
  [[nodiscard]] lifecycle::PodLifecycle& lifecycle() { return *lifecycle_; }
  [[nodiscard]] ports::PortManager& ports() { return *ports_; }
  [[nodiscard]] sched::Scheduler& scheduler() { return *scheduler_; }
  [[nodiscard]] tunnel::TunnelGateway& gateway() { return *gateway_; }
  [[nodiscard]] sim::SimCluster& cluster() { return *cluster_; }
  [[nodiscard]] telemetry::MetricsRegistry& metrics() { return metrics_; }
  [[nodiscard]] lifecycle::EventLog& events() { return *events_; }
  [[nodiscard]] reservation::ReservationBook& reservations() { return *book_; }
  [[nodiscard]] const reservation::Inventory& inventory() const { return inventory_; }
  [[nodiscard]] Authenticator& authenticator() { return *auth_; }
  /// Null unless start_http.
  [[nodiscard]] HttpGateway* http() { return http_.get(); }

 private:
  void driver_loop();

  ServiceConfig config_;
  Clock& clock_;
  reservation::Inventory inventory_;
  telemetry::MetricsRegistry metrics_;
  std::unique_ptr<ports::IndexStore> store_;
  std::unique_ptr<tunnel::TunnelGateway> gateway_;
  std::unique_ptr<sim::SimCluster> cluster_;
  std::unique_ptr<sched::Scheduler> scheduler_;
  std::unique_ptr<ports::PortManager> ports_;
  std::unique_ptr<reservation::ReservationBook> book_;
  std::unique_ptr<lifecycle::EventLog> events_;
  std::unique_ptr<lifecycle::PodLifecycle> lifecycle_;
  std::unique_ptr<Authenticator> auth_;
  std::unique_ptr<FederationService> service_;
  std::unique_ptr<HttpGateway> http_;

  std::mutex driver_mu_;
  std::condition_variable driver_cv_;
  bool stopping_ = false;
  std::thread driver_;
};

}  // namespace podfed::api
