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
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"
#include "podfed/common/error.hpp"
#include "podfed/reservation/inventory.hpp"

namespace podfed::reservation {

/// Half-open interval [start, end) in UTC seconds.
struct TimeWindow {
  std::int64_t start = 0;
  std::int64_t end = 0;

  [[nodiscard]] bool contains(std::int64_t t) const noexcept { return start <= t && t < end; }
  [[nodiscard]] bool overlaps(const TimeWindow& o) const noexcept {
    return start < o.end && o.start < end;
  }
  bool operator==(const TimeWindow&) const = default;
};

struct Reservation {
  std::string reservation_id;
  std::string user_id;
  std::string testbed_id;
  std::string node_id;
  std::set<std::string> device_ids;
  TimeWindow window;

  bool operator==(const Reservation&) const = default;
};

struct ReservationRequest {
  std::string user_id;
  std::string testbed_id;
  std::string node_id;
  std::set<std::string> device_ids;
  TimeWindow window;
};

/// Thrown when a request overlaps an existing reservation on a device or node.
class ReservationConflict : public Error {
 public:
  explicit ReservationConflict(Reservation blocking);
  [[nodiscard]] const Reservation& blocking() const noexcept { return blocking_; }

 private:
  Reservation blocking_;
};

/// Calendar of device + edge-node claims.
///
/// No two stored reservations with overlapping windows share a device or an
/// edge node. Mutations are serialized; reads see a consistent snapshot. When
/// a journal path is given, every mutation is appended to it before it takes
/// effect and the journal is replayed on construction.
class ReservationBook {
 public:
  ReservationBook(const Inventory& inventory, const Clock& clock,
                  std::optional<std::filesystem::path> journal = std::nullopt);

  /// Errors: invalid_window, not_found (testbed/node/device), ReservationConflict.
  Reservation create(const ReservationRequest& request);
  /// Errors: not_found; forbidden when `user_id` is not the owner and not admin.
  void cancel(const std::string& reservation_id, const std::string& user_id, bool is_admin = false);

  /// The user's reservation whose window contains `now`, if any.
  [[nodiscard]] std::optional<Reservation> active(const std::string& user_id, std::int64_t now) const;
  /// The user's earliest reservation starting after `now`.
  [[nodiscard]] std::optional<Reservation> next(const std::string& user_id, std::int64_t now) const;
  [[nodiscard]] std::optional<Reservation> find(const std::string& reservation_id) const;
  /// Ordered by (start, id). Empty testbed id means all.
  [[nodiscard]] std::vector<Reservation> list(const std::string& testbed_id = {}) const;
  [[nodiscard]] std::size_t size() const;

 private:
  void validate(const ReservationRequest& request) const;
  [[nodiscard]] const Reservation* find_conflict(const ReservationRequest& request) const;
  void append_journal(const nlohmann::json& record);
  void replay(const std::filesystem::path& path);

  const Inventory& inventory_;
  const Clock& clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Reservation> reservations_;
  std::uint64_t next_id_ = 1;
  std::optional<std::filesystem::path> journal_path_;
  std::ofstream journal_;
};

nlohmann::json to_json(const Reservation& r);
Reservation reservation_from_json(const nlohmann::json& j);

}  // namespace podfed::reservation
