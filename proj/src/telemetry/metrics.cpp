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

#include "podfed/telemetry/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "podfed/common/error.hpp"

namespace podfed::telemetry {
namespace {

bool valid_name(const std::string& s, bool allow_colon) {
  if (s.empty()) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
                       (allow_colon && c == ':');
    const bool digit = c >= '0' && c <= '9';
    if (!(alpha || (i > 0 && digit))) return false;
  }
  return true;
}

void escape_into(std::string& out, const std::string& v) {
  for (char c : v) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"':  out += "\\\""; break;
      case '\n': out += "\\n"; break;
      default:   out += c;
    }
  }
}

}  // namespace

std::string series_key(const std::string& name, const Labels& labels) {
  std::string out = name;
  if (labels.empty()) return out;
  out += '{';
  bool first = true;
  for (const auto& [k, v] : labels) {
    if (!first) out += ',';
    first = false;
    out += k;
    out += "=\"";
    escape_into(out, v);
    out += '"';
  }
  out += '}';
  return out;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string render_sample(const MetricSample& s) {
  return series_key(s.name, s.labels) + " " + format_value(s.value) + " " +
         std::to_string(s.timestamp_ms);
}

MetricsRegistry::MetricsRegistry(std::chrono::milliseconds retention) : retention_(retention) {
  if (retention_.count() <= 0) throw Error(Errc::invalid_argument, "retention must be positive");
}

void MetricsRegistry::record(const MetricSample& sample) {
  if (!valid_name(sample.name, true)) {
    throw Error(Errc::invalid_argument, "invalid metric name '" + sample.name + "'");
  }
  for (const auto& [k, v] : sample.labels) {
    if (!valid_name(k, false) || k.rfind("__", 0) == 0) {
      throw Error(Errc::invalid_argument, "invalid label name '" + k + "'");
    }
  }
  const std::string key = series_key(sample.name, sample.labels);
  std::lock_guard lock(mu_);
  auto [it, fresh] = series_.try_emplace(key);
  Series& s = it->second;
  if (fresh) {
    s.name = sample.name;
    s.labels = sample.labels;
  } else if (!s.points.empty() && sample.timestamp_ms < s.points.back().first) {
    throw Error(Errc::invalid_argument, "timestamp regression in series " + key + ": " +
                                            std::to_string(sample.timestamp_ms) + " < " +
                                            std::to_string(s.points.back().first));
  }
  s.points.emplace_back(sample.timestamp_ms, sample.value);
  const std::int64_t horizon = sample.timestamp_ms - retention_.count();
  while (!s.points.empty() && s.points.front().first < horizon) s.points.pop_front();
}

void MetricsRegistry::record(const std::string& name, const Labels& labels, double value, Instant at) {
  record(MetricSample{name, labels, value, unix_millis(at)});
}

std::vector<MetricSample> MetricsRegistry::query(const std::string& name, const Labels& match) const {
  std::vector<MetricSample> out;
  std::lock_guard lock(mu_);
  for (const auto& [key, s] : series_) {
    if (s.name != name) continue;
    const bool ok = std::all_of(match.begin(), match.end(), [&](const auto& kv) {
      auto l = s.labels.find(kv.first);
      return l != s.labels.end() && l->second == kv.second;
    });
    if (!ok) continue;
    for (const auto& [ts, v] : s.points) out.push_back({s.name, s.labels, v, ts});
  }
  return out;
}

std::vector<MetricSample> MetricsRegistry::latest() const {
  std::vector<MetricSample> out;
  std::lock_guard lock(mu_);
  for (const auto& [key, s] : series_) {
    if (s.points.empty()) continue;
    out.push_back({s.name, s.labels, s.points.back().second, s.points.back().first});
  }
  return out;
}

std::size_t MetricsRegistry::series_count() const {
  std::lock_guard lock(mu_);
  return series_.size();
}

std::string MetricsRegistry::scrape() const {
  std::vector<std::string> lines;
  for (const auto& s : latest()) lines.push_back(render_sample(s));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace podfed::telemetry
