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
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "podfed/api/auth.hpp"
#include "podfed/common/clock.hpp"
#include "podfed/common/error.hpp"
#include "podfed/lifecycle/lifecycle.hpp"
#include "podfed/reservation/inventory.hpp"
#include "podfed/reservation/reservation_book.hpp"
#include "podfed/telemetry/metrics.hpp"

namespace podfed::api {

/// Error with a structured payload for the response body's "details"
/// (next reservation window, blocking reservation, ...).
class ApiError : public Error {
 public:
  ApiError(Errc code, const std::string& message, nlohmann::json details)
      : Error(code, message), details_(std::move(details)) {}
  [[nodiscard]] const nlohmann::json& details() const noexcept { return details_; }

 private:
  nlohmann::json details_;
};

enum class SessionState { requested, provisioning, live, closed };

[[nodiscard]] std::string_view to_string(SessionState s) noexcept;

struct SessionDescriptor {
  std::string session_id;
  std::string user_id;
  std::string reservation_id;
  std::string app;
  std::optional<std::string> pod_name;
  SessionState state = SessionState::requested;
  std::optional<std::uint16_t> web_port;  ///< set while Live
  std::string pod_phase;
  std::string reason;  ///< pending or failure reason while Provisioning
  Instant created_at{};
};

nlohmann::json to_json(const SessionDescriptor& s);

struct ConnectRequest {
  std::string reservation_id;
  std::string app;
  std::string instance = "new";  ///< "new" or an existing session id
};

struct UploadResult {
  std::string session_id;
  std::string pod_name;
  std::string path;
  std::uint64_t bytes = 0;
};

/// Global resource counters; a connect/disconnect pair leaves them unchanged.
struct ResourceCounters {
  std::size_t index_entries = 0;
  std::size_t pods = 0;
  std::int64_t allocated_cpu_millicores = 0;
  std::int64_t allocated_mem_bytes = 0;
  std::size_t tunnels = 0;
  std::size_t web_bridges = 0;

  bool operator==(const ResourceCounters&) const = default;
};

nlohmann::json to_json(const ResourceCounters& c);

struct ServiceOptions {
  std::filesystem::path upload_dir = "uploads";
  std::uint64_t upload_max_bytes = 64ULL << 20;
};

/// Transport-independent federation API: authentication, inventory,
/// reservations, session connect/disconnect and read-only snapshots. Every
/// call except authenticate() and metrics() takes a bearer token.
class FederationService {
 public:
  FederationService(Clock& clock, Authenticator& auth, const reservation::Inventory& inventory,
                    reservation::ReservationBook& book, lifecycle::PodLifecycle& pods,
                    sched::Scheduler& scheduler, ports::PortManager& ports,
                    tunnel::TunnelGateway& gateway, sim::SimCluster& cluster,
                    telemetry::MetricsRegistry& metrics, ServiceOptions options = {});

  ApiToken authenticate(const std::string& user_id, const std::string& password);
  /// Errors: unauthorized.
  [[nodiscard]] ApiToken check(const std::string& token) const;

  nlohmann::json inventory(const std::string& token, const reservation::InventoryFilter& filter);
  /// Every reservation (optionally one testbed's), for calendar pre-checks.
  nlohmann::json reservations(const std::string& token, const std::string& testbed_id);
  reservation::Reservation reserve(const std::string& token, reservation::ReservationRequest request);
  void cancel_reservation(const std::string& token, const std::string& reservation_id);

  /// Errors: forbidden (not the reservation owner, outside the window, or
  /// someone else's session), not_found, exhausted / unavailable /
  /// reclaim_failed (no capacity or ports).
  SessionDescriptor connect(const std::string& token, const ConnectRequest& request);
  /// Idempotent. Errors: not_found, forbidden.
  SessionDescriptor disconnect(const std::string& token, const std::string& session_id);
  /// Own sessions (admins: all), Closed ones excluded.
  std::vector<SessionDescriptor> sessions(const std::string& token);
  /// Admins get node capacities, the pending queue and tunnels; users get
  /// the device/pod view only.
  nlohmann::json cluster_status(const std::string& token);
  /// Errors: not_found, forbidden (neither owner nor admin).
  nlohmann::json pod_status(const std::string& token, const std::string& pod_name);
  /// Stores a file in the session pod's working directory.
  /// Errors: too_large, invalid_argument (bad file name), not_found, forbidden.
  UploadResult upload(const std::string& token, const std::string& session_id,
                      const std::string& file_name, const std::string& content);

  /// Text exposition of the metrics registry, freshly published.
  std::string metrics();
  [[nodiscard]] ResourceCounters counters();
  /// Promotes Provisioning sessions whose pods became Ready.
  void refresh();

 private:
  SessionDescriptor& owned_session(const ApiToken& who, const std::string& session_id);
  /// Caller holds mu_.
  void sync(SessionDescriptor& s);

  Clock& clock_;
  Authenticator& auth_;
  const reservation::Inventory& inventory_;
  reservation::ReservationBook& book_;
  lifecycle::PodLifecycle& pods_;
  sched::Scheduler& scheduler_;
  ports::PortManager& ports_;
  tunnel::TunnelGateway& gateway_;
  sim::SimCluster& cluster_;
  telemetry::MetricsRegistry& metrics_;
  ServiceOptions options_;

  std::mutex mu_;
  std::map<std::string, SessionDescriptor> sessions_;
  std::uint64_t next_session_ = 1;
};

/// Safe single path component for uploads; throws invalid_argument.
[[nodiscard]] std::string sanitize_file_name(const std::string& name);

}  // namespace podfed::api
