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

#include "podfed/telemetry/jitter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <time.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "podfed/common/error.hpp"
#include "podfed/net/socket.hpp"

namespace podfed::telemetry {

double PacketTrace::nominal_interval_us() const {
  return static_cast<double>(payload_bytes) * 8.0 / nominal_rate_bps * 1e6;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::invalid_argument, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

JitterReport compute_jitter(const PacketTrace& trace, double spike_threshold_ms) {
  if (!(trace.nominal_rate_bps > 0.0)) throw Error(Errc::invalid_argument, "nominal rate must be > 0");
  if (trace.payload_bytes == 0) throw Error(Errc::invalid_argument, "payload size must be > 0");
  const auto& t = trace.arrivals_us;
  if (t.size() < 2) throw Error(Errc::invalid_argument, "jitter needs at least two arrivals");

  JitterReport r;
  const double nominal_us = trace.nominal_interval_us();
  r.nominal_interval_ms = nominal_us / 1000.0;
  r.spike_threshold_ms = spike_threshold_ms;
  r.per_interval_ms.reserve(t.size() - 1);

  double smoothed = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] <= t[i - 1]) {
      throw Error(Errc::invalid_argument,
                  "arrival timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    }
    const double d = std::abs(static_cast<double>(t[i] - t[i - 1]) - nominal_us) / 1000.0;
    r.per_interval_ms.push_back(d);
    smoothed += (d - smoothed) / 16.0;
  }
  r.rfc3550_ms = smoothed;

  const auto& v = r.per_interval_ms;
  r.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  r.max_ms = *std::max_element(v.begin(), v.end());
  r.p95_ms = nearest_rank_percentile(v, 95.0);

  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!(v[k] > spike_threshold_ms)) continue;
    // Interval k runs from arrival k to arrival k + 1.
    const double start = static_cast<double>(t[k] - t[0]) / 1e6;
    const double end = static_cast<double>(t[k + 1] - t[0]) / 1e6;
    if (!r.spikes.empty() && r.spikes.back().last_interval + 1 == k) {
      auto& w = r.spikes.back();
      w.end_s = end;
      w.last_interval = k;
      w.peak_ms = std::max(w.peak_ms, v[k]);
    } else {
      r.spikes.push_back({start, end, v[k], k, k});
    }
  }
  return r;
}

PacketTrace read_trace_csv(std::istream& in, double rate_bps, std::uint32_t payload_bytes) {
  PacketTrace trace;
  trace.nominal_rate_bps = rate_bps;
  trace.payload_bytes = payload_bytes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(Errc::invalid_argument, "trace line " + std::to_string(lineno) + ": expected seq,timestamp_us");
    }
    try {
      std::size_t used = 0;
      const std::string ts = line.substr(comma + 1);
      const std::int64_t us = std::stoll(ts, &used);
      if (used != ts.size()) throw std::invalid_argument("trailing characters");
      trace.arrivals_us.push_back(us);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "trace line " + std::to_string(lineno) + ": bad timestamp");
    }
  }
  return trace;
}

PacketTrace read_trace_csv(const std::filesystem::path& path, double rate_bps,
                           std::uint32_t payload_bytes) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open trace " + path.string());
  return read_trace_csv(in, rate_bps, payload_bytes);
}

void write_trace_csv(std::ostream& out, const PacketTrace& trace) {
  out << "seq,timestamp_us\n";
  for (std::size_t i = 0; i < trace.arrivals_us.size(); ++i) {
    out << i << ',' << trace.arrivals_us[i] << '\n';
  }
}

namespace {

std::int64_t monotonic_us() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000 + ts.tv_nsec / 1000;
}

net::Socket udp_socket() {
  int fd = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(Errc::io, std::string("socket: ") + std::strerror(errno));
  return net::Socket(fd);
}

}  // namespace

JitterReport measure_loopback_jitter(Duration duration, double rate_bps, std::uint32_t payload_bytes,
                                     double spike_threshold_ms) {
  if (!(rate_bps > 0.0)) throw Error(Errc::invalid_argument, "rate must be > 0");
  if (duration.count() <= 0) throw Error(Errc::invalid_argument, "duration must be > 0");
  if (payload_bytes < 8 || payload_bytes > 65000) {
    throw Error(Errc::invalid_argument, "payload must be 8..65000 bytes");
  }

  net::Socket rx = udp_socket();
  int rcvbuf = 8 << 20;
  ::setsockopt(rx.fd(), SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(rx.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error(Errc::io, std::string("bind: ") + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(rx.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  net::set_recv_timeout(rx, std::chrono::milliseconds{200});

  PacketTrace trace;
  trace.nominal_rate_bps = rate_bps;
  trace.payload_bytes = payload_bytes;
  const auto interval = std::chrono::nanoseconds(
      static_cast<std::int64_t>(std::llround(trace.nominal_interval_us() * 1000.0)));
  const std::uint64_t count = std::max<std::uint64_t>(
      2, static_cast<std::uint64_t>(std::chrono::nanoseconds(duration) / interval));

  std::atomic<bool> sending{true};
  std::vector<std::int64_t> arrivals;
  arrivals.reserve(count);
  std::thread receiver([&] {
    std::vector<char> buf(payload_bytes + 16);
    while (arrivals.size() < count) {
      const ssize_t n = ::recv(rx.fd(), buf.data(), buf.size(), 0);
      if (n < 0) {
        if (!sending) break;
        continue;
      }
      std::int64_t now = monotonic_us();
      if (!arrivals.empty() && now <= arrivals.back()) now = arrivals.back() + 1;
      arrivals.push_back(now);
    }
  });

  net::Socket tx = udp_socket();
  std::vector<char> payload(payload_bytes, 'x');
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seq = 0; seq < count; ++seq) {
    std::this_thread::sleep_until(start + seq * interval);
    std::memcpy(payload.data(), &seq, sizeof seq);
    ::sendto(tx.fd(), payload.data(), payload.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  }
  sending = false;
  receiver.join();

  if (arrivals.size() < 2) throw Error(Errc::io, "loopback stream lost nearly every datagram");
  trace.arrivals_us = std::move(arrivals);
  JitterReport r = compute_jitter(trace, spike_threshold_ms);
  r.packets_sent = count;
  r.packets_received = trace.arrivals_us.size();
  r.lossy = static_cast<double>(count - r.packets_received) > 0.01 * static_cast<double>(count);
  return r;
}

nlohmann::json to_json(const JitterReport& r, bool include_series) {
  nlohmann::json spikes = nlohmann::json::array();
  for (const auto& s : r.spikes) {
    spikes.push_back({{"start_s", s.start_s}, {"end_s", s.end_s}, {"peak_ms", s.peak_ms}});
  }
  nlohmann::json j{{"intervals", r.per_interval_ms.size()},
                   {"nominal_interval_ms", r.nominal_interval_ms},
                   {"mean_ms", r.mean_ms},
                   {"p95_ms", r.p95_ms},
                   {"max_ms", r.max_ms},
                   {"spike_threshold_ms", r.spike_threshold_ms},
                   {"spikes", spikes},
                   {"rfc3550_ms", r.rfc3550_ms}};
  if (r.packets_sent > 0) {
    j["packets_sent"] = r.packets_sent;
    j["packets_received"] = r.packets_received;
    j["lossy"] = r.lossy;
  }
  if (include_series) j["per_interval_ms"] = r.per_interval_ms;
  return j;
}

}  // namespace podfed::telemetry
