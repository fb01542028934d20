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

#include "podfed/api/config.hpp"
#include "podfed/ports/port_manager.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "podfed/common/error.hpp"

namespace podfed::api {
namespace {

using nlohmann::json;

#define PODFED_CONFIG_FIELDS(X)                                                                  \
  X(http_host) X(http_port) X(inventory_file) X(users_file) X(journal_file) X(event_log_file)    \
  X(upload_dir) X(upload_max_bytes) X(token_ttl_s) X(login_throttle_s) X(gateway_host)           \
  X(tunnel_control_port) X(keepalive_enabled) X(keepalive_interval_s) X(keepalive_max_missed)    \
  X(idle_timeout_s) X(apps) X(app_cpu_millicores) X(app_mem_bytes) X(store) X(ramp_s)            \
  X(noise_fraction) X(seed) X(pull_delay_s) X(step_timeout_s) X(readiness_period_s)              \
  X(liveness_period_s) X(failure_threshold) X(sweep_period_s) X(driver_period_s)

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::invalid_argument, msg); }

std::string env_name(const std::string& key) {
  std::string out = "PODFED_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

/// Coerces `value` to the JSON type of `like`, rejecting lossy conversions.
json coerce(const std::string& key, const json& like, const json& value) {
  if (like.is_string()) {
    if (!value.is_string()) invalid("config key '" + key + "' must be a string");
    return value;
  }
  if (like.is_boolean()) {
    if (!value.is_boolean()) invalid("config key '" + key + "' must be a boolean");
    return value;
  }
  if (!value.is_number()) invalid("config key '" + key + "' must be a number");
  if (like.is_number_float()) return value.get<double>();
  const double d = value.get<double>();
  if (value.is_number_float() && d != std::floor(d)) invalid("config key '" + key + "' must be an integer");
  if (like.is_number_unsigned() && d < 0) invalid("config key '" + key + "' must be non-negative");
  return value;
}

json parse_env_value(const std::string& key, const json& like, const std::string& raw) {
  if (like.is_string()) return raw;
  if (like.is_boolean()) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    invalid(env_name(key) + " must be true/false");
  }
  try {
    return coerce(key, like, json::parse(raw));
  } catch (const json::exception&) {
    invalid(env_name(key) + " is not a number: '" + raw + "'");
  }
}

}  // namespace

json to_json(const ServiceConfig& c) {
  json j = json::object();
#define PODFED_TO_JSON(f) j[#f] = c.f;
  PODFED_CONFIG_FIELDS(PODFED_TO_JSON)
#undef PODFED_TO_JSON
  return j;
}

std::optional<std::string> ServiceConfig::process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

ServiceConfig ServiceConfig::from_json(const json& overrides, const EnvLookup& env) {
  if (!overrides.is_null() && !overrides.is_object()) invalid("config file must hold a JSON object");
  json merged = to_json(ServiceConfig{});
  if (overrides.is_object()) {
    for (const auto& [key, value] : overrides.items()) {
      if (!merged.contains(key)) invalid("unknown config key '" + key + "'");
      merged[key] = coerce(key, merged[key], value);
    }
  }
  for (auto& [key, value] : merged.items()) {
    if (auto raw = env(env_name(key))) value = parse_env_value(key, value, *raw);
  }
  ServiceConfig c;
  try {
#define PODFED_FROM_JSON(f) c.f = merged.at(#f).get<decltype(c.f)>();
    PODFED_CONFIG_FIELDS(PODFED_FROM_JSON)
#undef PODFED_FROM_JSON
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ServiceConfig ServiceConfig::load(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  json doc;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::io, "cannot open config file " + file->string());
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      invalid("config file " + file->string() + ": " + e.what());
    }
  }
  return from_json(doc, env);
}

std::map<std::string, ports::IndexStoreConfig> ServiceConfig::app_ranges() const {
  std::map<std::string, ports::IndexStoreConfig> out;
  std::stringstream ss(apps);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string part;
    while (std::getline(is, part, ':')) parts.push_back(part);
    if (parts.size() != 4 || parts[0].empty()) {
      invalid("apps entry '" + item + "' must be <app>:<remote_base>:<web_base>:<max_index>");
    }
    ports::IndexStoreConfig cfg;
    try {
      const long remote = std::stol(parts[1]), web = std::stol(parts[2]), max = std::stol(parts[3]);
      if (remote <= 0 || remote > 65535 || web <= 0 || web > 65535 || max <= 0) throw std::out_of_range("");
      cfg.remote_base = static_cast<std::uint16_t>(remote);
      cfg.web_base = static_cast<std::uint16_t>(web);
      cfg.max_index = static_cast<std::uint32_t>(max);
    } catch (const std::logic_error&) {
      invalid("apps entry '" + item + "' has an invalid number");
    }
    cfg.validate();
    if (!out.emplace(parts[0], cfg).second) invalid("app " + parts[0] + " listed twice");
  }
  if (out.empty()) invalid("at least one app must be configured");
  ports::validate_app_ranges(out);
  return out;
}

void ServiceConfig::validate() const {
  (void)app_ranges();
  if (token_ttl_s <= 0) invalid("token_ttl_s must be > 0");
  if (keepalive_interval_s <= 0) invalid("keepalive_interval_s must be > 0");
  if (keepalive_max_missed < 1) invalid("keepalive_max_missed must be >= 1");
  if (idle_timeout_s < 0) invalid("idle_timeout_s must be >= 0");
  if (app_cpu_millicores <= 0 || app_mem_bytes <= 0) invalid("app request must be positive");
  if (ramp_s <= 0) invalid("ramp_s must be > 0");
  if (noise_fraction < 0 || noise_fraction >= 0.1) invalid("noise_fraction must be in [0, 0.1)");
  if (pull_delay_s < 0) invalid("pull_delay_s must be >= 0");
  if (step_timeout_s <= 0) invalid("step_timeout_s must be > 0");
  if (readiness_period_s <= 0 || liveness_period_s <= 0) invalid("probe periods must be > 0");
  if (failure_threshold < 1) invalid("failure_threshold must be >= 1");
  if (sweep_period_s <= 0 || driver_period_s <= 0) invalid("sweep/driver periods must be > 0");
  if (login_throttle_s < 0) invalid("login_throttle_s must be >= 0");
  if (upload_max_bytes == 0) invalid("upload_max_bytes must be > 0");
}

}  // namespace podfed::api
