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
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"
#include "podfed/common/types.hpp"
#include "podfed/ports/index_store.hpp"

namespace podfed::ports {

/// Port layout of one workload family: index i maps to
/// (remote_base + i, web_base + i) for i < max_index.
struct IndexStoreConfig {
  std::uint16_t remote_base = 2200;
  std::uint16_t web_base = 6080;
  std::uint32_t max_index = 64;

  /// Throws invalid_argument when the two ranges overlap or exceed 65535.
  void validate() const;
};

struct PortAssignment {
  std::uint32_t index = 0;
  std::uint16_t remote_port = 0;
  std::uint16_t web_port = 0;

  bool operator==(const PortAssignment&) const = default;
};

struct IndexEntry {
  std::string key;  ///< "<app>-<index>"
  std::uint32_t index = 0;
  std::uint16_t remote_port = 0;
  std::uint16_t web_port = 0;
  std::string session_id;
  std::int64_t created_at = 0;  ///< unix millis

  [[nodiscard]] PortAssignment assignment() const { return {index, remote_port, web_port}; }
  bool operator==(const IndexEntry&) const = default;
};

nlohmann::json to_json(const IndexEntry& e);
IndexEntry index_entry_from_json(const std::string& key, const nlohmann::json& j);

/// Who is listening on a port. Implemented by the tunnel gateway, which owns
/// every forwarder listener.
class ListenerProbe {
 public:
  virtual ~ListenerProbe() = default;
  [[nodiscard]] virtual bool listening(std::uint16_t port) const = 0;
  /// Shuts down a listener we own; false when the port is held by someone else.
  virtual bool shut_down(std::uint16_t port) = 0;
};

/// Nothing is ever listening.
class NullListenerProbe final : public ListenerProbe {
 public:
  bool listening(std::uint16_t) const override { return false; }
  bool shut_down(std::uint16_t) override { return true; }
};

/// Lowest non-negative integer absent from `sorted_active`, or nullopt when
/// every value below `max_index` is taken. Input must be sorted ascending.
[[nodiscard]] std::optional<std::uint32_t> lowest_free_index(
    const std::vector<std::uint32_t>& sorted_active, std::uint32_t max_index);

/// Throws invalid_argument when an app name is not a valid key prefix, a
/// range is invalid, or any two ranges (remote or web, across all apps)
/// overlap.
void validate_app_ranges(const std::map<std::string, IndexStoreConfig>& apps);

/// Dynamic port assignment over an index store.
///
/// allocate() reads the app's active keys, parses and sorts their indices,
/// takes the lowest free one, reclaims a stale listener on its remote port if
/// needed and writes the entry. Read-choose-write runs under one guard, and
/// the write is a set-if-absent so concurrent allocators sharing a remote
/// store never hand out the same index.
class PortManager {
 public:
  using ScaleSink = std::function<void(const ScaleSignal&)>;

  PortManager(IndexStore& store, ListenerProbe& listeners, const Clock& clock,
              std::map<std::string, IndexStoreConfig> apps, ScaleSink on_scale = {});

  /// Errors: not_found (unknown app), exhausted, reclaim_failed, unavailable.
  PortAssignment allocate(const std::string& app, const std::string& session_id);
  /// Idempotent; returns whether an entry was removed.
  bool release(const std::string& key);
  [[nodiscard]] std::optional<IndexEntry> lookup_key(const std::string& key);
  /// First entry owned by the session (optionally restricted to one app).
  [[nodiscard]] std::optional<IndexEntry> lookup_session(const std::string& session_id,
                                                         const std::string& app = {});
  /// Full store scan.
  [[nodiscard]] std::vector<IndexEntry> entries();
  /// true: the port is free (possibly after shutting a stale listener down).
  /// false: a live entry owns it. Throws reclaim_failed when a foreign
  /// listener cannot be shut down.
  bool reclaim(std::uint16_t port);

  [[nodiscard]] const IndexStoreConfig& config(const std::string& app) const;
  [[nodiscard]] std::vector<std::string> apps() const;
  /// Count of release() calls whose key was already absent.
  [[nodiscard]] std::uint64_t noop_releases() const { return noop_releases_; }

 private:
  [[nodiscard]] std::vector<std::uint32_t> active_indices(const std::string& app);
  [[nodiscard]] const std::string* app_owning_remote_port(std::uint16_t port) const;

  IndexStore& store_;
  ListenerProbe& listeners_;
  const Clock& clock_;
  std::map<std::string, IndexStoreConfig> apps_;
  ScaleSink on_scale_;
  std::mutex mu_;
  std::uint64_t noop_releases_ = 0;
};

}  // namespace podfed::ports
