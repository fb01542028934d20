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

#include "podfed/ports/index_store.hpp"

#include <algorithm>
#include <cctype>

#include "podfed/common/error.hpp"

namespace podfed::ports {
namespace {

std::pair<std::string, std::string> split_first(const std::string& s) {
  auto sp = s.find(' ');
  if (sp == std::string::npos) return {s, {}};
  return {s.substr(0, sp), s.substr(sp + 1)};
}

bool is_single_line(const std::string& s) { return s.find('\n') == std::string::npos; }

}  // namespace

void validate_key(const std::string& key) {
  if (key.empty() || key == "OK" || key.rfind("ERR", 0) == 0 || key.rfind("VAL", 0) == 0) {
    throw Error(Errc::invalid_argument, "reserved or empty store key '" + key + "'");
  }
  for (unsigned char c : key) {
    if (!std::isgraph(c)) throw Error(Errc::invalid_argument, "store key contains whitespace");
  }
}

void MemoryIndexStore::check() const {
  if (!available_) throw Error(Errc::unavailable, "index store unavailable");
}

std::vector<std::string> MemoryIndexStore::keys(const std::string& prefix) {
  std::lock_guard lock(mu_);
  check();
  std::vector<std::string> out;
  for (auto it = data_.lower_bound(prefix); it != data_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

std::optional<std::string> MemoryIndexStore::get(const std::string& key) {
  std::lock_guard lock(mu_);
  check();
  auto it = data_.find(key);
  if (it == data_.end()) return std::nullopt;
  return it->second;
}

void MemoryIndexStore::set(const std::string& key, const std::string& value) {
  validate_key(key);
  std::lock_guard lock(mu_);
  check();
  data_[key] = value;
}

bool MemoryIndexStore::set_if_absent(const std::string& key, const std::string& value) {
  validate_key(key);
  std::lock_guard lock(mu_);
  check();
  return data_.emplace(key, value).second;
}

void MemoryIndexStore::del(const std::string& key) {
  std::lock_guard lock(mu_);
  check();
  data_.erase(key);
}

RemoteIndexStore::RemoteIndexStore(net::Endpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<std::string> RemoteIndexStore::call(const std::string& line) {
  std::lock_guard lock(mu_);
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (!conn_.valid()) {
        conn_ = net::connect_tcp(endpoint_);
        carry_.clear();
      }
      net::write_all(conn_, line + "\n");
      std::vector<std::string> out;
      while (true) {
        auto resp = net::read_line(conn_, carry_);
        if (!resp) throw Error(Errc::unavailable, "index store closed the connection");
        out.push_back(*resp);
        if (*resp == "OK" || resp->rfind("ERR", 0) == 0 || resp->rfind("VAL ", 0) == 0) {
          return out;
        }
      }
    } catch (const Error& e) {
      conn_.close();
      if (attempt == 1) {
        throw Error(Errc::unavailable, "index store " + endpoint_.str() + ": " + e.what());
      }
    }
  }
  throw Error(Errc::unavailable, "index store " + endpoint_.str() + " unreachable");
}

std::vector<std::string> RemoteIndexStore::keys(const std::string& prefix) {
  auto lines = call("GET " + prefix);
  if (lines.back() != "OK") throw Error(Errc::unavailable, "index store: " + lines.back());
  lines.pop_back();
  return lines;
}

std::optional<std::string> RemoteIndexStore::get(const std::string& key) {
  auto lines = call("FETCH " + key);
  const std::string& last = lines.back();
  if (last.rfind("VAL ", 0) == 0) return last.substr(4);
  if (last == "ERR not-found") return std::nullopt;
  throw Error(Errc::unavailable, "index store: " + last);
}

void RemoteIndexStore::set(const std::string& key, const std::string& value) {
  validate_key(key);
  if (!is_single_line(value)) throw Error(Errc::invalid_argument, "store value must be one line");
  auto lines = call("SET " + key + " " + value);
  if (lines.back() != "OK") throw Error(Errc::unavailable, "index store: " + lines.back());
}

bool RemoteIndexStore::set_if_absent(const std::string& key, const std::string& value) {
  validate_key(key);
  if (!is_single_line(value)) throw Error(Errc::invalid_argument, "store value must be one line");
  auto lines = call("SETNX " + key + " " + value);
  if (lines.back() == "OK") return true;
  if (lines.back() == "ERR exists") return false;
  throw Error(Errc::unavailable, "index store: " + lines.back());
}

void RemoteIndexStore::del(const std::string& key) {
  auto lines = call("DEL " + key);
  if (lines.back() != "OK") throw Error(Errc::unavailable, "index store: " + lines.back());
}

IndexStoreServer::IndexStoreServer(IndexStore& backing, const std::string& host,
                                   std::uint16_t port)
    : backing_(backing), listener_(net::listen_tcp(host, port)) {
  endpoint_ = {host, net::local_port(listener_)};
  acceptor_ = std::thread([this] { accept_loop(); });
}

IndexStoreServer::~IndexStoreServer() { stop(); }

void IndexStoreServer::stop() {
  if (stopping_.exchange(true)) return;
  listener_.shutdown_both();
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(conns_mu_);
    for (auto& c : conns_) c->shutdown_both();
  }
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  listener_.close();
}

void IndexStoreServer::accept_loop() {
  while (!stopping_) {
    auto conn = net::accept(listener_);
    if (!conn) break;
    auto shared = std::make_shared<net::Socket>(std::move(*conn));
    std::lock_guard lock(conns_mu_);
    if (stopping_) break;
    conns_.push_back(shared);
    workers_.emplace_back([this, shared] { serve(shared); });
  }
}

void IndexStoreServer::serve(std::shared_ptr<net::Socket> conn) {
  std::string carry;
  while (auto line = net::read_line(*conn, carry)) {
    if (!line->empty() && line->back() == '\r') line->pop_back();
    try {
      net::write_all(*conn, handle(backing_, *line));
    } catch (const Error&) {
      break;
    }
  }
}

std::string IndexStoreServer::handle(IndexStore& store, const std::string& line) {
  auto [cmd, rest] = split_first(line);
  try {
    if (cmd == "GET") {
      std::string out;
      for (const auto& k : store.keys(rest)) out += k + "\n";
      return out + "OK\n";
    }
    if (cmd == "FETCH") {
      auto v = store.get(rest);
      return v ? "VAL " + *v + "\n" : "ERR not-found\n";
    }
    if (cmd == "SET" || cmd == "SETNX") {
      auto [key, value] = split_first(rest);
      if (value.empty()) return "ERR missing value\n";
      if (cmd == "SET") {
        store.set(key, value);
        return "OK\n";
      }
      return store.set_if_absent(key, value) ? "OK\n" : "ERR exists\n";
    }
    if (cmd == "DEL") {
      store.del(rest);
      return "OK\n";
    }
    return "ERR unknown command\n";
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    return "ERR " + msg + "\n";
  }
}

}  // namespace podfed::ports
