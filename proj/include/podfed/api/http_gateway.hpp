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
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "podfed/api/service.hpp"
#include "podfed/common/error.hpp"

namespace podfed::api {

/// HTTP status for an error code.
[[nodiscard]] int http_status(Errc code) noexcept;
/// `{"error", "message", "retryable", "details"}` body for a failure.
[[nodiscard]] nlohmann::json error_body(const Error& e);

/// HTTP/1.1 + JSON front end of FederationService. The endpoint table lives
/// in docs/http-api.md. Serves on a background thread from construction
/// until stop() or destruction.
class HttpGateway {
 public:
  /// Port 0 picks an ephemeral port. Errors: io (cannot bind).
  HttpGateway(FederationService& service, const std::string& host, std::uint16_t port,
              std::uint64_t max_body_bytes = 64ULL << 20);
  ~HttpGateway();
  HttpGateway(const HttpGateway&) = delete;
  HttpGateway& operator=(const HttpGateway&) = delete;

  [[nodiscard]] std::uint16_t port() const;
  [[nodiscard]] const std::string& host() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace podfed::api
