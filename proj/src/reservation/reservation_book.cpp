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

#include "podfed/reservation/reservation_book.hpp"

#include <algorithm>
#include <mutex>
#include <tuple>

#include <nlohmann/json.hpp>

namespace podfed::reservation {
namespace {

using nlohmann::json;

std::string describe(const Reservation& r) {
  return r.reservation_id + " (user " + r.user_id + ", node " + r.node_id + ", [" +
         std::to_string(r.window.start) + ", " + std::to_string(r.window.end) + "))";
}

bool shares_device(const std::set<std::string>& a, const std::set<std::string>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return false;
}

std::uint64_t id_number(const std::string& id) {
  auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoull(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

ReservationConflict::ReservationConflict(Reservation blocking)
    : Error(Errc::conflict, "conflicts with reservation " + describe(blocking)),
      blocking_(std::move(blocking)) {}

ReservationBook::ReservationBook(const Inventory& inventory, const Clock& clock,
                                 std::optional<std::filesystem::path> journal)
    : inventory_(inventory), clock_(clock), journal_path_(std::move(journal)) {
  if (journal_path_) {
    if (std::filesystem::exists(*journal_path_)) replay(*journal_path_);
    journal_.open(*journal_path_, std::ios::app);
    if (!journal_) throw Error(Errc::io, "cannot open journal " + journal_path_->string());
  }
}

void ReservationBook::replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      // A torn final write is the only expected corruption; stop there.
      break;
    }
    const std::string op = rec.value("op", "");
    if (op == "create") {
      Reservation r = reservation_from_json(rec.at("reservation"));
      next_id_ = std::max(next_id_, id_number(r.reservation_id) + 1);
      reservations_[r.reservation_id] = std::move(r);
    } else if (op == "cancel") {
      reservations_.erase(rec.at("reservation_id").get<std::string>());
    } else {
      throw Error(Errc::invalid_argument,
                  "journal " + path.string() + ":" + std::to_string(lineno) + ": unknown op");
    }
  }
}

void ReservationBook::append_journal(const json& record) {
  if (!journal_path_) return;
  journal_ << record.dump() << '\n';
  journal_.flush();
  if (!journal_) throw Error(Errc::io, "journal write failed");
}

void ReservationBook::validate(const ReservationRequest& req) const {
  if (req.window.end <= req.window.start) {
    throw Error(Errc::invalid_window, "window end must be after start");
  }
  if (req.window.end <= unix_seconds(clock_.now())) {
    throw Error(Errc::invalid_window, "window lies entirely in the past");
  }
  if (req.user_id.empty()) throw Error(Errc::invalid_argument, "user id required");
  if (req.device_ids.empty()) throw Error(Errc::invalid_argument, "at least one device required");
  const Testbed& tb = inventory_.testbed(req.testbed_id);
  if (!tb.has_node(req.node_id)) {
    throw Error(Errc::not_found, "node " + req.node_id + " is not part of testbed " + tb.testbed_id);
  }
  for (const auto& d : req.device_ids) {
    if (tb.find_device(d) == nullptr) {
      throw Error(Errc::not_found, "device " + d + " is not part of testbed " + tb.testbed_id);
    }
  }
}

const Reservation* ReservationBook::find_conflict(const ReservationRequest& req) const {
  const Reservation* first = nullptr;
  for (const auto& [id, r] : reservations_) {
    if (!r.window.overlaps(req.window)) continue;
    if (r.node_id == req.node_id || shares_device(r.device_ids, req.device_ids)) {
      if (first == nullptr || r.window.start < first->window.start) first = &r;
    }
  }
  return first;
}

Reservation ReservationBook::create(const ReservationRequest& req) {
  std::unique_lock lock(mu_);
  validate(req);
  if (const Reservation* blocking = find_conflict(req)) throw ReservationConflict(*blocking);

  Reservation r;
  r.reservation_id = "rsv-" + std::to_string(next_id_);
  r.user_id = req.user_id;
  r.testbed_id = req.testbed_id;
  r.node_id = req.node_id;
  r.device_ids = req.device_ids;
  r.window = req.window;

  append_journal(json{{"op", "create"}, {"reservation", to_json(r)}});
  ++next_id_;
  reservations_.emplace(r.reservation_id, r);
  return r;
}

void ReservationBook::cancel(const std::string& reservation_id, const std::string& user_id,
                             bool is_admin) {
  std::unique_lock lock(mu_);
  auto it = reservations_.find(reservation_id);
  if (it == reservations_.end()) {
    throw Error(Errc::not_found, "no reservation " + reservation_id);
  }
  if (!is_admin && it->second.user_id != user_id) {
    throw Error(Errc::forbidden, "reservation " + reservation_id + " belongs to another user");
  }
  append_journal(json{{"op", "cancel"}, {"reservation_id", reservation_id}});
  reservations_.erase(it);
}

std::optional<Reservation> ReservationBook::active(const std::string& user_id,
                                                   std::int64_t now) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, r] : reservations_) {
    if (r.user_id == user_id && r.window.contains(now)) return r;
  }
  return std::nullopt;
}

std::optional<Reservation> ReservationBook::next(const std::string& user_id,
                                                 std::int64_t now) const {
  std::shared_lock lock(mu_);
  const Reservation* best = nullptr;
  for (const auto& [id, r] : reservations_) {
    if (r.user_id != user_id || r.window.start <= now) continue;
    if (best == nullptr || r.window.start < best->window.start) best = &r;
  }
  return best ? std::optional<Reservation>(*best) : std::nullopt;
}

std::optional<Reservation> ReservationBook::find(const std::string& reservation_id) const {
  std::shared_lock lock(mu_);
  auto it = reservations_.find(reservation_id);
  if (it == reservations_.end()) return std::nullopt;
  return it->second;
}

std::vector<Reservation> ReservationBook::list(const std::string& testbed_id) const {
  std::shared_lock lock(mu_);
  std::vector<Reservation> out;
  for (const auto& [id, r] : reservations_) {
    if (testbed_id.empty() || r.testbed_id == testbed_id) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const Reservation& a, const Reservation& b) {
    return std::tie(a.window.start, a.reservation_id) < std::tie(b.window.start, b.reservation_id);
  });
  return out;
}

std::size_t ReservationBook::size() const {
  std::shared_lock lock(mu_);
  return reservations_.size();
}

json to_json(const Reservation& r) {
  return json{{"reservation_id", r.reservation_id},
              {"user_id", r.user_id},
              {"testbed_id", r.testbed_id},
              {"node_id", r.node_id},
              {"device_ids", r.device_ids},
              {"start", r.window.start},
              {"end", r.window.end}};
}

Reservation reservation_from_json(const json& j) {
  Reservation r;
  r.reservation_id = j.at("reservation_id").get<std::string>();
  r.user_id = j.at("user_id").get<std::string>();
  r.testbed_id = j.at("testbed_id").get<std::string>();
  r.node_id = j.at("node_id").get<std::string>();
  r.device_ids = j.at("device_ids").get<std::set<std::string>>();
  r.window = {j.at("start").get<std::int64_t>(), j.at("end").get<std::int64_t>()};
  return r;
}

}  // namespace podfed::reservation
