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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/types.hpp"

namespace podfed::reservation {

struct Device {
  std::string device_id;
  std::string kind;     ///< device class, e.g. "radio-transceiver"
  std::string model;    ///< free-form, e.g. "USRP N210"
  std::string node_id;  ///< owning edge node
  double x = 0.0;       ///< layout-map position, normalized to [0,1]
  double y = 0.0;
};

/// Compute resources of one edge server. Ids double as simulated worker ids.
struct EdgeNode {
  std::string node_id;
  std::int64_t cpu_millicores = 0;
  std::int64_t mem_bytes = 0;
  Labels labels;
};

struct Testbed {
  std::string testbed_id;
  std::string lab_id;
  std::string name;
  std::vector<std::string> edge_nodes;
  std::vector<Device> devices;

  [[nodiscard]] const Device* find_device(const std::string& id) const;
  [[nodiscard]] bool has_node(const std::string& id) const;
};

struct Lab {
  std::string lab_id;
  std::string name;
  std::vector<std::string> testbeds;
};

struct LabTree {
  Lab lab;
  std::vector<Testbed> testbeds;
};

struct InventoryFilter {
  enum class Kind { none, lab, testbed };
  Kind kind = Kind::none;
  std::string id;

  static InventoryFilter all() { return {}; }
  static InventoryFilter lab(std::string id) { return {Kind::lab, std::move(id)}; }
  static InventoryFilter testbed(std::string id) { return {Kind::testbed, std::move(id)}; }
};

/// Lab -> testbed -> edge node -> device hierarchy, immutable after load.
class Inventory {
 public:
  /// Validates ids, parent links and layout positions; throws invalid_argument.
  static Inventory from_json(const nlohmann::json& doc);
  static Inventory load(const std::filesystem::path& path);

  /// Sorted by id at every level. Labs without testbeds are hidden.
  [[nodiscard]] std::vector<LabTree> list(const InventoryFilter& filter = {}) const;

  [[nodiscard]] const Testbed& testbed(const std::string& id) const;
  [[nodiscard]] const Lab& lab(const std::string& id) const;
  [[nodiscard]] const EdgeNode& node(const std::string& id) const;
  [[nodiscard]] std::vector<EdgeNode> nodes() const;
  /// Testbed that owns the given edge node.
  [[nodiscard]] const Testbed& testbed_of_node(const std::string& node_id) const;

 private:
  std::map<std::string, Lab> labs_;
  std::map<std::string, Testbed> testbeds_;
  std::map<std::string, EdgeNode> nodes_;
  std::map<std::string, std::string> node_testbed_;
};

nlohmann::json to_json(const std::vector<LabTree>& tree);
nlohmann::json to_json(const Device& device);

}  // namespace podfed::reservation
