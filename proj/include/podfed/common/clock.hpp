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
#include <chrono>
#include <cstdint>

namespace podfed {

using Duration = std::chrono::microseconds;
/// UTC wall time at microsecond resolution.
using Instant = std::chrono::sys_time<Duration>;

using std::chrono_literals::operator""s;
using std::chrono_literals::operator""ms;

/// Time source shared by every timed component (pull delays, ramps, probes,
/// keepalives, token expiry). `sleep_for` on a simulated clock advances
/// simulated time instead of blocking.
class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual Instant now() const = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  [[nodiscard]] Instant now() const override;
  void sleep_for(Duration d) override;
};

/// Deterministic clock for tests and compressed simulations.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Instant start = Instant{std::chrono::seconds{1'700'000'000}})
      : micros_(start.time_since_epoch().count()) {}

  [[nodiscard]] Instant now() const override { return Instant{Duration{micros_.load()}}; }
  void sleep_for(Duration d) override { advance(d); }

  void advance(Duration d) { micros_.fetch_add(d.count()); }
  void set(Instant t) { micros_.store(t.time_since_epoch().count()); }

 private:
  std::atomic<std::int64_t> micros_;
};

[[nodiscard]] inline std::int64_t unix_seconds(Instant t) {
  return std::chrono::floor<std::chrono::seconds>(t).time_since_epoch().count();
}

[[nodiscard]] inline std::int64_t unix_millis(Instant t) {
  return std::chrono::floor<std::chrono::milliseconds>(t).time_since_epoch().count();
}

[[nodiscard]] inline Instant from_unix_seconds(std::int64_t s) {
  return Instant{std::chrono::seconds{s}};
}

[[nodiscard]] inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}

[[nodiscard]] inline Duration from_seconds(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

}  // namespace podfed
