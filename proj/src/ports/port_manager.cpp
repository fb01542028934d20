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

#include "podfed/ports/port_manager.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "podfed/common/error.hpp"

namespace podfed::ports {
namespace {

using nlohmann::json;

struct Range {
  std::uint32_t lo, hi;  // [lo, hi)
  std::string what;
};

bool overlaps(const Range& a, const Range& b) { return a.lo < b.hi && b.lo < a.hi; }

std::optional<std::uint32_t> parse_index(const std::string& key, const std::string& prefix) {
  if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  const char* first = key.data() + prefix.size();
  const char* last = key.data() + key.size();
  if (*first == '+' || (*first == '0' && last - first > 1)) return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

}  // namespace

void IndexStoreConfig::validate() const {
  if (max_index == 0) throw Error(Errc::invalid_argument, "max_index must be positive");
  if (remote_base + max_index > 65536u || web_base + max_index > 65536u) {
    throw Error(Errc::invalid_argument, "port range exceeds 65535");
  }
  const bool disjoint = remote_base + max_index <= web_base || web_base + max_index <= remote_base;
  if (!disjoint) throw Error(Errc::invalid_argument, "remote and web port ranges overlap");
}

json to_json(const IndexEntry& e) {
  return json{{"index", e.index},           {"remote_port", e.remote_port},
              {"web_port", e.web_port},     {"session_id", e.session_id},
              {"created_at", e.created_at}};
}

IndexEntry index_entry_from_json(const std::string& key, const json& j) {
  IndexEntry e;
  e.key = key;
  e.index = j.at("index").get<std::uint32_t>();
  e.remote_port = j.at("remote_port").get<std::uint16_t>();
  e.web_port = j.at("web_port").get<std::uint16_t>();
  e.session_id = j.value("session_id", "");
  e.created_at = j.value("created_at", std::int64_t{0});
  return e;
}

std::optional<std::uint32_t> lowest_free_index(const std::vector<std::uint32_t>& sorted_active,
                                               std::uint32_t max_index) {
  std::uint32_t candidate = 0;
  for (std::uint32_t idx : sorted_active) {
    if (idx > candidate) break;
    if (idx == candidate) ++candidate;
  }
  if (candidate >= max_index) return std::nullopt;
  return candidate;
}

void validate_app_ranges(const std::map<std::string, IndexStoreConfig>& apps) {
  std::vector<Range> ranges;
  for (const auto& [app, cfg] : apps) {
    validate_key(app + "-0");
    cfg.validate();
    ranges.push_back({cfg.remote_base, cfg.remote_base + cfg.max_index, app + " remote"});
    ranges.push_back({cfg.web_base, cfg.web_base + cfg.max_index, app + " web"});
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      if (overlaps(ranges[i], ranges[j])) {
        throw Error(Errc::invalid_argument,
                    "port ranges overlap: " + ranges[i].what + " and " + ranges[j].what);
      }
    }
  }
}

PortManager::PortManager(IndexStore& store, ListenerProbe& listeners, const Clock& clock,
                         std::map<std::string, IndexStoreConfig> apps, ScaleSink on_scale)
    : store_(store),
      listeners_(listeners),
      clock_(clock),
      apps_(std::move(apps)),
      on_scale_(std::move(on_scale)) {
  validate_app_ranges(apps_);
}

const IndexStoreConfig& PortManager::config(const std::string& app) const {
  auto it = apps_.find(app);
  if (it == apps_.end()) throw Error(Errc::not_found, "no port range configured for app " + app);
  return it->second;
}

std::vector<std::string> PortManager::apps() const {
  std::vector<std::string> out;
  for (const auto& [app, cfg] : apps_) out.push_back(app);
  return out;
}

std::vector<std::uint32_t> PortManager::active_indices(const std::string& app) {
  const std::string prefix = app + "-";
  std::vector<std::uint32_t> out;
  for (const auto& key : store_.keys(prefix)) {
    if (auto idx = parse_index(key, prefix)) out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::string* PortManager::app_owning_remote_port(std::uint16_t port) const {
  for (const auto& [app, cfg] : apps_) {
    if (port >= cfg.remote_base && port < cfg.remote_base + cfg.max_index) return &app;
  }
  return nullptr;
}

bool PortManager::reclaim(std::uint16_t port) {
  if (!listeners_.listening(port)) return true;
  if (const std::string* app = app_owning_remote_port(port)) {
    const auto& cfg = apps_.at(*app);
    const std::string key = ordinal_name(*app, port - cfg.remote_base);
    if (store_.get(key).has_value()) return false;
  }
  if (listeners_.shut_down(port)) {
    spdlog::info("reclaimed stale listener on port {}", port);
    return true;
  }
  throw Error(Errc::reclaim_failed, "port " + std::to_string(port) + " is held by a foreign listener");
}

PortAssignment PortManager::allocate(const std::string& app, const std::string& session_id) {
  const IndexStoreConfig& cfg = config(app);
  std::lock_guard lock(mu_);

  std::set<std::uint32_t> skipped;
  // Bounded: every retry either skips an index or observes a concurrent writer.
  for (std::uint32_t attempt = 0; attempt <= 2 * cfg.max_index; ++attempt) {
    const auto active = active_indices(app);
    std::vector<std::uint32_t> taken = active;
    taken.insert(taken.end(), skipped.begin(), skipped.end());
    std::sort(taken.begin(), taken.end());
    auto chosen = lowest_free_index(taken, cfg.max_index);
    if (!chosen) {
      throw Error(Errc::exhausted, "all " + std::to_string(cfg.max_index) + " indices of " + app +
                                       " are in use");
    }

    const std::uint32_t index = *chosen;
    PortAssignment pa{index, static_cast<std::uint16_t>(cfg.remote_base + index),
                      static_cast<std::uint16_t>(cfg.web_base + index)};
    if (!reclaim(pa.remote_port)) {
      skipped.insert(index);
      continue;
    }

    IndexEntry entry{ordinal_name(app, index), index, pa.remote_port, pa.web_port, session_id,
                     unix_millis(clock_.now())};
    if (!store_.set_if_absent(entry.key, to_json(entry).dump())) continue;

    const std::uint32_t span = active.empty() ? 0 : active.back() + 1;
    if (index >= span && on_scale_) on_scale_(ScaleSignal{app, index + 1});
    return pa;
  }
  throw Error(Errc::unavailable, "index store contention while allocating for " + app);
}

bool PortManager::release(const std::string& key) {
  std::lock_guard lock(mu_);
  if (!store_.get(key)) {
    ++noop_releases_;
    spdlog::debug("release of absent index key {}", key);
    return false;
  }
  store_.del(key);
  return true;
}

std::optional<IndexEntry> PortManager::lookup_key(const std::string& key) {
  auto raw = store_.get(key);
  if (!raw) return std::nullopt;
  return index_entry_from_json(key, json::parse(*raw));
}

std::optional<IndexEntry> PortManager::lookup_session(const std::string& session_id,
                                                      const std::string& app) {
  for (const auto& key : store_.keys(app.empty() ? std::string{} : app + "-")) {
    auto raw = store_.get(key);
    if (!raw) continue;
    IndexEntry e = index_entry_from_json(key, json::parse(*raw));
    if (e.session_id == session_id) return e;
  }
  return std::nullopt;
}

std::vector<IndexEntry> PortManager::entries() {
  std::vector<IndexEntry> out;
  for (const auto& key : store_.keys("")) {
    auto raw = store_.get(key);
    if (!raw) continue;
    out.push_back(index_entry_from_json(key, json::parse(*raw)));
  }
  return out;
}

}  // namespace podfed::ports
