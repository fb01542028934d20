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
#include <map>
#include <string>

namespace podfed {

using Labels = std::map<std::string, std::string>;

/// Desired replica count for one workload family (StatefulSet analog).
struct ScaleSignal {
  std::string app;
  std::uint32_t target_replicas = 0;

  bool operator==(const ScaleSignal&) const = default;
};

constexpr std::int64_t kMiB = 1024LL * 1024;
constexpr std::int64_t kGiB = 1024LL * kMiB;

/// "<app>-<index>", the ordinal pod / index-store key.
[[nodiscard]] inline std::string ordinal_name(const std::string& app, std::uint32_t index) {
  return app + "-" + std::to_string(index);
}

}  // namespace podfed
