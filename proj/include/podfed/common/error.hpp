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

#include <stdexcept>
#include <string>
#include <string_view>

namespace podfed {

enum class Errc {
  not_found,
  conflict,
  forbidden,
  unauthorized,
  locked,
  invalid_argument,
  invalid_window,
  exhausted,
  unavailable,
  reclaim_failed,
  port_in_use,
  pod_not_ready,
  tunnel_expired,
  timeout,
  too_large,
  io,
};

[[nodiscard]] constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::not_found:        return "not-found";
    case Errc::conflict:         return "conflict";
    case Errc::forbidden:        return "forbidden";
    case Errc::unauthorized:     return "unauthorized";
    case Errc::locked:           return "locked";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_window:   return "invalid-window";
    case Errc::exhausted:        return "exhausted";
    case Errc::unavailable:      return "unavailable";
    case Errc::reclaim_failed:   return "reclaim-failed";
    case Errc::port_in_use:      return "port-in-use";
    case Errc::pod_not_ready:    return "pod-not-ready";
    case Errc::tunnel_expired:   return "tunnel-expired";
    case Errc::timeout:          return "timeout";
    case Errc::too_large:        return "too-large";
    case Errc::io:               return "io";
  }
  return "unknown";
}

/// Base exception for every recoverable failure surfaced by the library.
/// `retryable()` marks failures a caller may simply repeat (store outages).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  [[nodiscard]] bool retryable() const noexcept { return code_ == Errc::unavailable; }

 private:
  Errc code_;
};

}  // namespace podfed
