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

#include "podfed/api/auth.hpp"

#include <fstream>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <nlohmann/json.hpp>

#include "podfed/common/error.hpp"

namespace podfed::api {
namespace {

using nlohmann::json;

std::string to_hex(const unsigned char* p, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out += kDigits[p[i] >> 4];
    out += kDigits[p[i] & 0xf];
  }
  return out;
}

}  // namespace

std::string_view to_string(Role r) noexcept { return r == Role::admin ? "admin" : "user"; }

std::string hash_password(std::string_view salt, std::string_view password) {
  std::string input;
  input.reserve(salt.size() + password.size());
  input.append(salt).append(password);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 failed");
  }
  return to_hex(digest, len);
}

std::string random_hex(std::size_t n) {
  std::vector<unsigned char> buf(n);
  if (RAND_bytes(buf.data(), static_cast<int>(n)) != 1) throw Error(Errc::io, "RAND_bytes failed");
  return to_hex(buf.data(), n);
}

UserStore::UserStore(std::vector<User> users) {
  for (auto& u : users) {
    if (u.user_id.empty()) throw Error(Errc::invalid_argument, "user without user_id");
    const std::string id = u.user_id;
    if (!users_.emplace(id, std::move(u)).second) {
      throw Error(Errc::invalid_argument, "duplicate user " + id);
    }
  }
}

UserStore UserStore::from_json(const json& doc) {
  std::vector<User> users;
  try {
    for (const auto& ju : doc.at("users")) {
      User u;
      u.user_id = ju.at("user_id").get<std::string>();
      const std::string role = ju.value("role", "user");
      if (role != "user" && role != "admin") {
        throw Error(Errc::invalid_argument, "user " + u.user_id + " has unknown role " + role);
      }
      u.role = role == "admin" ? Role::admin : Role::user;
      u.salt = ju.value("salt", "");
      u.password_sha256 = ju.at("password_sha256").get<std::string>();
      u.locked = ju.value("locked", false);
      users.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("users file: ") + e.what());
  }
  return UserStore(std::move(users));
}

UserStore UserStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open users file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, "users file " + path.string() + ": " + e.what());
  }
}

const User* UserStore::find(const std::string& user_id) const {
  auto it = users_.find(user_id);
  return it == users_.end() ? nullptr : &it->second;
}

bool UserStore::verify(const User& user, std::string_view password) const {
  const std::string h = hash_password(user.salt, password);
  return h.size() == user.password_sha256.size() &&
         CRYPTO_memcmp(h.data(), user.password_sha256.data(), h.size()) == 0;
}

json to_json(const ApiToken& t) {
  return {{"token", t.token},
          {"user_id", t.user_id},
          {"role", to_string(t.role)},
          {"expires_at", unix_seconds(t.expires_at)}};
}

Authenticator::Authenticator(Clock& clock, UserStore users, Duration ttl, Duration throttle_step)
    : clock_(clock), users_(std::move(users)), ttl_(ttl), throttle_step_(throttle_step) {
  if (ttl_.count() <= 0) throw Error(Errc::invalid_argument, "token ttl must be > 0");
}

ApiToken Authenticator::authenticate(const std::string& user_id, const std::string& password) {
  bool throttled;
  {
    std::lock_guard lock(mu_);
    throttled = failures_[user_id] > 0;
  }
  if (throttled && throttle_step_.count() > 0) clock_.sleep_for(throttle_step_);

  const User* u = users_.find(user_id);
  if (!u || !users_.verify(*u, password)) {
    std::lock_guard lock(mu_);
    ++failures_[user_id];
    throw Error(Errc::unauthorized, "invalid credentials");
  }
  if (u->locked) throw Error(Errc::locked, "user " + user_id + " is locked");

  ApiToken t{random_hex(24), u->user_id, u->role, clock_.now() + ttl_};
  std::lock_guard lock(mu_);
  failures_.erase(user_id);
  // Drop expired tokens so the table stays bounded.
  const Instant now = clock_.now();
  std::erase_if(tokens_, [&](const auto& kv) { return kv.second.expires_at <= now; });
  tokens_.emplace(t.token, t);
  return t;
}

ApiToken Authenticator::validate(const std::string& token) const {
  std::lock_guard lock(mu_);
  auto it = tokens_.find(token);
  if (it == tokens_.end()) throw Error(Errc::unauthorized, "unknown token");
  if (clock_.now() >= it->second.expires_at) throw Error(Errc::unauthorized, "token expired");
  return it->second;
}

void Authenticator::revoke(const std::string& token) {
  std::lock_guard lock(mu_);
  tokens_.erase(token);
}

std::uint32_t Authenticator::failed_attempts(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  auto it = failures_.find(user_id);
  return it == failures_.end() ? 0 : it->second;
}

}  // namespace podfed::api
