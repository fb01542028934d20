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
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "podfed/ports/port_manager.hpp"

namespace podfed::api {

/// Service configuration. Sources, highest precedence first:
///   1. environment variables PODFED_<KEY> (key upper-cased),
///   2. a flat JSON object file,
///   3. the defaults below.
/// Unknown keys in the file are rejected.
struct ServiceConfig {
  std::string http_host = "127.0.0.1";
  std::uint16_t http_port = 8080;
  std::string inventory_file;  ///< empty: built-in desk-scale inventory
  std::string users_file;
  std::string journal_file;    ///< empty: reservations are not persisted
  std::string event_log_file;  ///< empty: lifecycle events stay in memory
  std::string upload_dir = "uploads";
  std::uint64_t upload_max_bytes = 64ULL << 20;
  std::int64_t token_ttl_s = 8 * 3600;
  double login_throttle_s = 1.0;

  std::string gateway_host = "127.0.0.1";
  std::uint16_t tunnel_control_port = 0;
  bool keepalive_enabled = true;
  double keepalive_interval_s = 15.0;
  std::uint32_t keepalive_max_missed = 3;
  double idle_timeout_s = 0.0;  ///< 0 disables

  /// Comma-separated "<app>:<remote_base>:<web_base>:<max_index>".
  std::string apps = "gnuradio:2200:6080:64,oai:2300:6180:64";
  std::int64_t app_cpu_millicores = 500;
  std::int64_t app_mem_bytes = 2LL << 30;
  /// "memory" or "host:port" of an index store server.
  std::string store = "memory";

  double ramp_s = 120.0;
  double noise_fraction = 0.02;
  std::uint64_t seed = 1;
  double pull_delay_s = 2.0;
  double step_timeout_s = 30.0;
  double readiness_period_s = 5.0;
  double liveness_period_s = 10.0;
  std::uint32_t failure_threshold = 3;
  double sweep_period_s = 5.0;
  double driver_period_s = 1.0;  ///< how often the background driver ticks

  using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

  /// Errors: invalid_argument (unknown key, wrong type, bad env value), io.
  static ServiceConfig load(const std::optional<std::filesystem::path>& file,
                            const EnvLookup& env = process_env);
  static ServiceConfig from_json(const nlohmann::json& overrides, const EnvLookup& env = no_env);
  static std::optional<std::string> process_env(const std::string& name);
  static std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

  /// Parsed `apps` (validated, ranges may not overlap).
  [[nodiscard]] std::map<std::string, ports::IndexStoreConfig> app_ranges() const;
  void validate() const;
};

nlohmann::json to_json(const ServiceConfig& c);

}  // namespace podfed::api
