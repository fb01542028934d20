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

// podfed: run the federation service and its companion utilities.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "podfed/api/auth.hpp"
#include "podfed/api/config.hpp"
#include "podfed/api/deployment.hpp"
#include "podfed/common/error.hpp"
#include "podfed/ports/index_store.hpp"
#include "podfed/telemetry/jitter.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds{200});
}

int run_serve(const std::string& config_file) {
  std::optional<std::filesystem::path> file;
  if (!config_file.empty()) file = config_file;
  const auto config = podfed::api::ServiceConfig::load(file);
  podfed::SystemClock clock;
  podfed::api::Deployment d(config, clock);
  spdlog::info("tunnel control endpoint {}", d.gateway().control_endpoint().str());
  wait_for_signal();
  spdlog::info("shutting down");
  d.stop();
  return 0;
}

void print_report(const podfed::telemetry::JitterReport& r, bool json_out, bool series) {
  if (json_out) {
    std::cout << podfed::telemetry::to_json(r, series).dump(2) << "\n";
    return;
  }
  std::cout << "intervals      " << r.per_interval_ms.size() << "\n"
            << "nominal_ms     " << r.nominal_interval_ms << "\n"
            << "mean_ms        " << r.mean_ms << "\n"
            << "p95_ms         " << r.p95_ms << "\n"
            << "max_ms         " << r.max_ms << "\n"
            << "rfc3550_ms     " << r.rfc3550_ms << "\n"
            << "spikes (>" << r.spike_threshold_ms << " ms)\n";
  for (const auto& s : r.spikes) {
    std::cout << "  " << s.start_s << "s - " << s.end_s << "s  peak " << s.peak_ms << " ms\n";
  }
  if (r.packets_sent > 0) {
    std::cout << "packets        " << r.packets_received << "/" << r.packets_sent
              << (r.lossy ? "  (lossy)" : "") << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"podfed: edge-testbed pod federation service"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  std::string config_file;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API, tunnel gateway and simulated edge cluster");
  serve->add_option("-c,--config", config_file, "JSON config file (env PODFED_<KEY> overrides it)");

  std::string trace_file;
  double rate_bps = 10e6, threshold_ms = 1.75;
  std::uint32_t payload = 1250;
  bool json_out = false, series = false;
  auto* jitter = app.add_subcommand("jitter", "Analyse a packet trace CSV (seq,timestamp_us)");
  jitter->add_option("trace", trace_file, "trace file")->required()->check(CLI::ExistingFile);
  jitter->add_option("--rate-bps", rate_bps, "nominal stream rate")->capture_default_str();
  jitter->add_option("--payload-bytes", payload, "datagram payload size")->capture_default_str();
  jitter->add_option("--threshold-ms", threshold_ms, "spike threshold")->capture_default_str();
  jitter->add_flag("--json", json_out, "print JSON");
  jitter->add_flag("--series", series, "include per-interval values in JSON output");

  double duration_s = 5.0;
  std::string save_trace;
  auto* loopback = app.add_subcommand("loopback", "Measure jitter of a paced UDP stream over 127.0.0.1");
  loopback->add_option("--duration-s", duration_s, "stream duration")->capture_default_str();
  loopback->add_option("--rate-bps", rate_bps, "stream rate")->capture_default_str();
  loopback->add_option("--payload-bytes", payload, "datagram payload size")->capture_default_str();
  loopback->add_option("--threshold-ms", threshold_ms, "spike threshold")->capture_default_str();
  loopback->add_flag("--json", json_out, "print JSON");

  std::string store_host = "127.0.0.1";
  std::uint16_t store_port = 6390;
  auto* store = app.add_subcommand("store-server", "Serve an in-memory index store over TCP");
  store->add_option("--host", store_host)->capture_default_str();
  store->add_option("--port", store_port)->capture_default_str();

  std::string salt, password;
  auto* hash = app.add_subcommand("hash-password", "Print a users-file entry for a password");
  hash->add_option("password", password)->required();
  hash->add_option("--salt", salt, "salt (default: 16 random bytes)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*serve) return run_serve(config_file);
    if (*jitter) {
      const auto trace = podfed::telemetry::read_trace_csv(std::filesystem::path(trace_file), rate_bps, payload);
      print_report(podfed::telemetry::compute_jitter(trace, threshold_ms), json_out, series);
      return 0;
    }
    if (*loopback) {
      print_report(podfed::telemetry::measure_loopback_jitter(podfed::from_seconds(duration_s), rate_bps, payload,
                                                              threshold_ms),
                   json_out, false);
      return 0;
    }
    if (*store) {
      podfed::ports::MemoryIndexStore backing;
      podfed::ports::IndexStoreServer server(backing, store_host, store_port);
      spdlog::info("index store listening on {}", server.endpoint().str());
      wait_for_signal();
      server.stop();
      return 0;
    }
    if (*hash) {
      if (salt.empty()) salt = podfed::api::random_hex(16);
      nlohmann::json entry = {{"salt", salt}, {"password_sha256", podfed::api::hash_password(salt, password)}};
      std::cout << entry.dump() << "\n";
      return 0;
    }
  } catch (const podfed::Error& e) {
    std::cerr << "podfed: " << podfed::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "podfed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
