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

#include "podfed/reservation/inventory.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "podfed/common/error.hpp"

namespace podfed::reservation {
namespace {

using nlohmann::json;

std::string require_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string() || obj.at(key).get<std::string>().empty()) {
    throw Error(Errc::invalid_argument, where + ": missing string field '" + key + "'");
  }
  return obj.at(key).get<std::string>();
}

void invalid(const std::string& msg) { throw Error(Errc::invalid_argument, "inventory: " + msg); }

}  // namespace

const Device* Testbed::find_device(const std::string& id) const {
  for (const auto& d : devices) {
    if (d.device_id == id) return &d;
  }
  return nullptr;
}

bool Testbed::has_node(const std::string& id) const {
  return std::find(edge_nodes.begin(), edge_nodes.end(), id) != edge_nodes.end();
}

Inventory Inventory::from_json(const json& doc) {
  Inventory inv;
  if (!doc.contains("labs") || !doc.at("labs").is_array()) invalid("top-level 'labs' array required");

  for (const auto& jl : doc.at("labs")) {
    Lab lab;
    lab.lab_id = require_string(jl, "lab_id", "lab");
    lab.name = jl.value("name", lab.lab_id);
    if (inv.labs_.count(lab.lab_id)) invalid("duplicate lab_id " + lab.lab_id);

    for (const auto& jt : jl.value("testbeds", json::array())) {
      Testbed tb;
      tb.testbed_id = require_string(jt, "testbed_id", "testbed");
      tb.lab_id = lab.lab_id;
      tb.name = jt.value("name", tb.testbed_id);
      if (inv.testbeds_.count(tb.testbed_id)) invalid("duplicate testbed_id " + tb.testbed_id);

      for (const auto& jn : jt.value("nodes", json::array())) {
        EdgeNode node;
        node.node_id = require_string(jn, "node_id", "node");
        node.cpu_millicores = jn.value("cpu_millicores", std::int64_t{0});
        node.mem_bytes = jn.value("mem_bytes", std::int64_t{0});
        if (node.cpu_millicores <= 0 || node.mem_bytes <= 0) {
          invalid("node " + node.node_id + " needs positive cpu_millicores and mem_bytes");
        }
        node.labels = jn.value("labels", Labels{});
        node.labels.emplace("testbed", tb.testbed_id);
        if (inv.nodes_.count(node.node_id)) invalid("duplicate node_id " + node.node_id);
        tb.edge_nodes.push_back(node.node_id);
        inv.node_testbed_[node.node_id] = tb.testbed_id;
        inv.nodes_.emplace(node.node_id, std::move(node));
      }

      std::set<std::string> device_ids;
      for (const auto& jd : jt.value("devices", json::array())) {
        Device d;
        d.device_id = require_string(jd, "device_id", "device");
        d.kind = jd.value("kind", "radio-transceiver");
        d.model = jd.value("model", "");
        d.node_id = require_string(jd, "node_id", "device " + d.device_id);
        auto pos = jd.value("layout_pos", std::vector<double>{0.0, 0.0});
        if (pos.size() != 2) invalid("device " + d.device_id + " layout_pos must be [x, y]");
        d.x = pos[0];
        d.y = pos[1];
        if (d.x < 0.0 || d.x > 1.0 || d.y < 0.0 || d.y > 1.0) {
          invalid("device " + d.device_id + " layout_pos outside [0,1]^2");
        }
        if (!tb.has_node(d.node_id)) {
          invalid("device " + d.device_id + " references unknown node " + d.node_id);
        }
        if (!device_ids.insert(d.device_id).second) {
          invalid("duplicate device_id " + d.device_id + " in testbed " + tb.testbed_id);
        }
        tb.devices.push_back(std::move(d));
      }
      std::sort(tb.devices.begin(), tb.devices.end(),
                [](const Device& a, const Device& b) { return a.device_id < b.device_id; });
      std::sort(tb.edge_nodes.begin(), tb.edge_nodes.end());

      lab.testbeds.push_back(tb.testbed_id);
      inv.testbeds_.emplace(tb.testbed_id, std::move(tb));
    }
    std::sort(lab.testbeds.begin(), lab.testbeds.end());
    inv.labs_.emplace(lab.lab_id, std::move(lab));
  }
  return inv;
}

Inventory Inventory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot open inventory file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_argument, "inventory " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

std::vector<LabTree> Inventory::list(const InventoryFilter& filter) const {
  std::vector<LabTree> out;
  switch (filter.kind) {
    case InventoryFilter::Kind::none:
      for (const auto& [id, lab] : labs_) {
        if (lab.testbeds.empty()) continue;
        LabTree t{lab, {}};
        for (const auto& tb : lab.testbeds) t.testbeds.push_back(testbeds_.at(tb));
        out.push_back(std::move(t));
      }
      break;
    case InventoryFilter::Kind::lab: {
      const Lab& l = lab(filter.id);
      LabTree t{l, {}};
      for (const auto& tb : l.testbeds) t.testbeds.push_back(testbeds_.at(tb));
      out.push_back(std::move(t));
      break;
    }
    case InventoryFilter::Kind::testbed: {
      const Testbed& tb = testbed(filter.id);
      out.push_back(LabTree{labs_.at(tb.lab_id), {tb}});
      break;
    }
  }
  return out;
}

const Testbed& Inventory::testbed(const std::string& id) const {
  auto it = testbeds_.find(id);
  if (it == testbeds_.end()) throw Error(Errc::not_found, "unknown testbed " + id);
  return it->second;
}

const Lab& Inventory::lab(const std::string& id) const {
  auto it = labs_.find(id);
  if (it == labs_.end()) throw Error(Errc::not_found, "unknown lab " + id);
  return it->second;
}

const EdgeNode& Inventory::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(Errc::not_found, "unknown edge node " + id);
  return it->second;
}

std::vector<EdgeNode> Inventory::nodes() const {
  std::vector<EdgeNode> out;
  for (const auto& [id, n] : nodes_) out.push_back(n);
  return out;
}

const Testbed& Inventory::testbed_of_node(const std::string& node_id) const {
  auto it = node_testbed_.find(node_id);
  if (it == node_testbed_.end()) throw Error(Errc::not_found, "unknown edge node " + node_id);
  return testbeds_.at(it->second);
}

json to_json(const Device& d) {
  return json{{"device_id", d.device_id}, {"kind", d.kind},      {"model", d.model},
              {"node_id", d.node_id},     {"layout_pos", {d.x, d.y}}};
}

json to_json(const std::vector<LabTree>& tree) {
  json labs = json::array();
  for (const auto& lt : tree) {
    json tbs = json::array();
    for (const auto& tb : lt.testbeds) {
      json devices = json::array();
      for (const auto& d : tb.devices) devices.push_back(to_json(d));
      tbs.push_back(json{{"testbed_id", tb.testbed_id},
                         {"name", tb.name},
                         {"edge_nodes", tb.edge_nodes},
                         {"devices", devices}});
    }
    labs.push_back(json{{"lab_id", lt.lab.lab_id}, {"name", lt.lab.name}, {"testbeds", tbs}});
  }
  return json{{"labs", labs}};
}

}  // namespace podfed::reservation
