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
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "podfed/common/clock.hpp"

namespace podfed::telemetry {

/// Packet arrival times of a constant-rate stream.
struct PacketTrace {
  std::vector<std::int64_t> arrivals_us;  ///< strictly increasing
  double nominal_rate_bps = 10e6;
  std::uint32_t payload_bytes = 1250;

  /// payload_bytes * 8 / nominal_rate_bps, in microseconds.
  [[nodiscard]] double nominal_interval_us() const;
};

/// Consecutive above-threshold intervals merged into one window. Times are
/// seconds since the first arrival; the window spans from the arrival that
/// opens its first interval to the arrival that closes its last.
struct SpikeWindow {
  double start_s = 0.0;
  double end_s = 0.0;
  double peak_ms = 0.0;
  std::size_t first_interval = 0;
  std::size_t last_interval = 0;
};

struct JitterReport {
  std::vector<double> per_interval_ms;  ///< |(t_i - t_{i-1}) - nominal| for i >= 1
  double nominal_interval_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;  ///< nearest rank
  double max_ms = 0.0;
  double spike_threshold_ms = 0.0;
  std::vector<SpikeWindow> spikes;
  /// RFC 3550 smoothed interarrival jitter at the end of the trace.
  double rfc3550_ms = 0.0;

  // Filled by live measurements.
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_received = 0;
  bool lossy = false;  ///< loss above 1 %
};

/// Errors: invalid_argument for fewer than two arrivals, non-increasing
/// timestamps, or a non-positive rate / payload.
[[nodiscard]] JitterReport compute_jitter(const PacketTrace& trace, double spike_threshold_ms = 1.75);

/// Nearest-rank percentile (rank = ceil(p/100 * N), 1-based) of unsorted values.
[[nodiscard]] double nearest_rank_percentile(std::vector<double> values, double p);

/// CSV `seq,timestamp_us`, one packet per line. A header line starting
/// with a letter and blank lines are skipped. Rows are taken in file order.
[[nodiscard]] PacketTrace read_trace_csv(std::istream& in, double rate_bps, std::uint32_t payload_bytes);
[[nodiscard]] PacketTrace read_trace_csv(const std::filesystem::path& path, double rate_bps,
                                         std::uint32_t payload_bytes);
void write_trace_csv(std::ostream& out, const PacketTrace& trace);

/// Sends a paced UDP stream to itself over 127.0.0.1 and analyses the
/// arrivals. Datagrams carry a sequence number; arrivals sharing a
/// microsecond are nudged forward by 1 us to keep the trace strictly
/// increasing. Errors: invalid_argument (rate or duration not positive), io.
[[nodiscard]] JitterReport measure_loopback_jitter(Duration duration, double rate_bps,
                                                   std::uint32_t payload_bytes = 1250,
                                                   double spike_threshold_ms = 1.75);

nlohmann::json to_json(const JitterReport& r, bool include_series = false);

}  // namespace podfed::telemetry
