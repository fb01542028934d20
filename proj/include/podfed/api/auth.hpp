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
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"

namespace podfed::api {

enum class Role { user, admin };

[[nodiscard]] std::string_view to_string(Role r) noexcept;

struct User {
  std::string user_id;
  Role role = Role::user;
  std::string salt;
  std::string password_sha256;  ///< hex of SHA-256(salt || password)
  bool locked = false;
};

/// hex(SHA-256(salt || password)).
[[nodiscard]] std::string hash_password(std::string_view salt, std::string_view password);
/// `n` random bytes, hex encoded.
[[nodiscard]] std::string random_hex(std::size_t n);

/// Static user list loaded from `{"users": [{user_id, role, salt,
/// password_sha256, locked}]}`.
class UserStore {
 public:
  UserStore() = default;
  explicit UserStore(std::vector<User> users);
  static UserStore from_json(const nlohmann::json& doc);
  static UserStore load(const std::filesystem::path& path);

  [[nodiscard]] const User* find(const std::string& user_id) const;
  [[nodiscard]] bool verify(const User& user, std::string_view password) const;
  [[nodiscard]] std::size_t size() const { return users_.size(); }

 private:
  std::map<std::string, User> users_;
};

struct ApiToken {
  std::string token;
  std::string user_id;
  Role role = Role::user;
  Instant expires_at{};
};

nlohmann::json to_json(const ApiToken& t);

/// Issues and checks bearer tokens.
///
/// Login throttle: once a user id has a failed attempt on record, every
/// further attempt for it waits `throttle_step` (on the clock) before being
/// answered, until a success clears the record.
class Authenticator {
 public:
  Authenticator(Clock& clock, UserStore users, Duration ttl = std::chrono::hours{8},
                Duration throttle_step = std::chrono::seconds{1});

  /// Errors: unauthorized (unknown user, wrong password), locked.
  ApiToken authenticate(const std::string& user_id, const std::string& password);
  /// Errors: unauthorized (unknown or expired token).
  [[nodiscard]] ApiToken validate(const std::string& token) const;
  void revoke(const std::string& token);
  [[nodiscard]] std::uint32_t failed_attempts(const std::string& user_id) const;

 private:
  Clock& clock_;
  UserStore users_;
  Duration ttl_;
  Duration throttle_step_;
  mutable std::mutex mu_;
  std::map<std::string, ApiToken> tokens_;
  std::map<std::string, std::uint32_t> failures_;
};

}  // namespace podfed::api
