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

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "podfed/common/clock.hpp"
#include "podfed/common/types.hpp"

namespace podfed::telemetry {

struct MetricSample {
  std::string name;
  Labels labels;
  double value = 0.0;
  std::int64_t timestamp_ms = 0;

  bool operator==(const MetricSample&) const = default;
};

/// `name{k="v",...}` with labels in key order; the identity of a series.
[[nodiscard]] std::string series_key(const std::string& name, const Labels& labels);
/// One exposition line (no trailing newline):
///   name{label="value",...} value timestamp_ms
[[nodiscard]] std::string render_sample(const MetricSample& s);
/// Shortest decimal that round-trips the double; NaN and +/-Inf spelled
/// "NaN", "+Inf", "-Inf".
[[nodiscard]] std::string format_value(double v);

/// In-memory time-series store with per-series retention.
///
/// Each series keeps samples no older than `retention` relative to its
/// newest sample. Timestamps within a series must not go backwards.
class MetricsRegistry {
 public:
  explicit MetricsRegistry(std::chrono::milliseconds retention = std::chrono::hours{1});

  /// Errors: invalid_argument for a malformed metric/label name or a
  /// timestamp older than the series' newest sample.
  void record(const MetricSample& sample);
  void record(const std::string& name, const Labels& labels, double value, Instant at);

  /// Samples of every series named `name` whose labels contain `match`,
  /// grouped by series (key order), oldest first within a series.
  [[nodiscard]] std::vector<MetricSample> query(const std::string& name, const Labels& match = {}) const;
  /// Newest sample of every series, ordered by series key.
  [[nodiscard]] std::vector<MetricSample> latest() const;
  [[nodiscard]] std::size_t series_count() const;

  /// Text exposition of `latest()`: one line per series, lexicographically
  /// sorted, each terminated by '\n'. Empty registry gives "".
  [[nodiscard]] std::string scrape() const;

 private:
  struct Series {
    std::string name;
    Labels labels;
    std::deque<std::pair<std::int64_t, double>> points;
  };

  std::chrono::milliseconds retention_;
  mutable std::mutex mu_;
  std::map<std::string, Series> series_;
};

}  // namespace podfed::telemetry
