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
#include <optional>
#include <string>
#include <string_view>

#include "podfed/net/socket.hpp"

namespace podfed::tunnel {

/// Wire format of the reverse tunnel. Every frame is
///
///   +--------+--------+-------------------+
///   | type   | length | payload (length)  |
///   | 1 byte | 1 byte | 0..255 bytes      |
///   +--------+--------+-------------------+
///
/// Channel frames carry a big-endian u16 channel id as the first two
/// payload bytes.
enum class FrameType : std::uint8_t {
  register_tunnel = 0x01,  ///< pod -> gw: u16 remote_port, "pod_name target"
  register_ok = 0x02,      ///< gw -> pod
  register_err = 0x03,     ///< gw -> pod: reason text
  ping = 0x10,             ///< 1-byte sequence
  pong = 0x11,             ///< echoes the ping byte
  open = 0x20,             ///< gw -> pod: u16 channel
  data = 0x21,             ///< u16 channel + bytes
  eof = 0x22,              ///< u16 channel; sender will write no more
  close = 0x23,            ///< u16 channel; abort both directions
};

inline constexpr std::size_t kMaxPayload = 255;
inline constexpr std::size_t kMaxChunk = kMaxPayload - 2;

struct Frame {
  FrameType type{};
  std::string payload;
};

[[nodiscard]] std::string encode_frame(FrameType type, std::string_view payload = {});
[[nodiscard]] std::string channel_payload(std::uint16_t channel, std::string_view bytes = {});
[[nodiscard]] std::uint16_t frame_channel(const Frame& f);
[[nodiscard]] std::string_view frame_data(const Frame& f);
/// nullopt on EOF, socket error or an unknown frame type.
[[nodiscard]] std::optional<Frame> read_frame(const net::Socket& s);

[[nodiscard]] bool is_known(std::uint8_t type) noexcept;

}  // namespace podfed::tunnel
