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

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "podfed/net/socket.hpp"

namespace podfed::ports {

/// Minimal key-value registry the port allocator runs on.
///
/// Keys are printable, whitespace-free strings; values are single-line JSON
/// documents. Every call is individually atomic.
class IndexStore {
 public:
  virtual ~IndexStore() = default;
  /// Keys starting with `prefix`, sorted.
  [[nodiscard]] virtual std::vector<std::string> keys(const std::string& prefix) = 0;
  [[nodiscard]] virtual std::optional<std::string> get(const std::string& key) = 0;
  virtual void set(const std::string& key, const std::string& value) = 0;
  /// Writes only if the key is absent; false when it already exists.
  virtual bool set_if_absent(const std::string& key, const std::string& value) = 0;
  /// Idempotent.
  virtual void del(const std::string& key) = 0;
};

/// Throws invalid_argument for keys the line protocol cannot carry.
void validate_key(const std::string& key);

class MemoryIndexStore final : public IndexStore {
 public:
  std::vector<std::string> keys(const std::string& prefix) override;
  std::optional<std::string> get(const std::string& key) override;
  void set(const std::string& key, const std::string& value) override;
  bool set_if_absent(const std::string& key, const std::string& value) override;
  void del(const std::string& key) override;

  /// Simulates an outage: every call throws Error{unavailable} while set.
  void set_available(bool available) { available_ = available; }

 private:
  void check() const;

  std::mutex mu_;
  std::map<std::string, std::string> data_;
  std::atomic<bool> available_{true};
};

/// Client for the line protocol served by IndexStoreServer.
/// Connection failures surface as Error{unavailable}; one reconnect is
/// attempted per call.
class RemoteIndexStore final : public IndexStore {
 public:
  explicit RemoteIndexStore(net::Endpoint endpoint);

  std::vector<std::string> keys(const std::string& prefix) override;
  std::optional<std::string> get(const std::string& key) override;
  void set(const std::string& key, const std::string& value) override;
  bool set_if_absent(const std::string& key, const std::string& value) override;
  void del(const std::string& key) override;

 private:
  /// Sends one command line and returns the response lines up to and
  /// including the terminal OK/ERR/VAL line.
  std::vector<std::string> call(const std::string& line);

  net::Endpoint endpoint_;
  std::mutex mu_;
  net::Socket conn_;
  std::string carry_;
};

/// Serves an IndexStore over TCP using the line protocol:
///
///   GET <prefix>        -> zero or more "<key>" lines, then "OK"
///   FETCH <key>         -> "VAL <json>" | "ERR not-found"
///   SET <key> <json>    -> "OK"
///   SETNX <key> <json>  -> "OK" | "ERR exists"
///   DEL <key>           -> "OK"
///   anything else       -> "ERR <message>"
class IndexStoreServer {
 public:
  IndexStoreServer(IndexStore& backing, const std::string& host, std::uint16_t port);
  ~IndexStoreServer();
  IndexStoreServer(const IndexStoreServer&) = delete;
  IndexStoreServer& operator=(const IndexStoreServer&) = delete;

  [[nodiscard]] net::Endpoint endpoint() const { return endpoint_; }
  void stop();

  /// Handles one request line; exposed for protocol tests.
  [[nodiscard]] static std::string handle(IndexStore& store, const std::string& line);

 private:
  void accept_loop();
  void serve(std::shared_ptr<net::Socket> conn);

  IndexStore& backing_;
  net::Socket listener_;
  net::Endpoint endpoint_;
  std::atomic<bool> stopping_{false};
  std::mutex conns_mu_;
  std::vector<std::shared_ptr<net::Socket>> conns_;
  std::vector<std::thread> workers_;
  std::thread acceptor_;
};

}  // namespace podfed::ports
