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

#include "podfed/tunnel/frame.hpp"

#include "podfed/common/error.hpp"

namespace podfed::tunnel {

bool is_known(std::uint8_t type) noexcept {
  switch (static_cast<FrameType>(type)) {
    case FrameType::register_tunnel:
    case FrameType::register_ok:
    case FrameType::register_err:
    case FrameType::ping:
    case FrameType::pong:
    case FrameType::open:
    case FrameType::data:
    case FrameType::eof:
    case FrameType::close:
      return true;
  }
  return false;
}

std::string encode_frame(FrameType type, std::string_view payload) {
  if (payload.size() > kMaxPayload) {
    throw Error(Errc::invalid_argument, "frame payload exceeds 255 bytes");
  }
  std::string out;
  out.reserve(2 + payload.size());
  out.push_back(static_cast<char>(type));
  out.push_back(static_cast<char>(static_cast<std::uint8_t>(payload.size())));
  out.append(payload);
  return out;
}

std::string channel_payload(std::uint16_t channel, std::string_view bytes) {
  std::string out;
  out.reserve(2 + bytes.size());
  out.push_back(static_cast<char>(channel >> 8));
  out.push_back(static_cast<char>(channel & 0xff));
  out.append(bytes);
  return out;
}

std::uint16_t frame_channel(const Frame& f) {
  if (f.payload.size() < 2) return 0;
  return static_cast<std::uint16_t>((static_cast<std::uint8_t>(f.payload[0]) << 8) |
                                    static_cast<std::uint8_t>(f.payload[1]));
}

std::string_view frame_data(const Frame& f) {
  if (f.payload.size() < 2) return {};
  return std::string_view(f.payload).substr(2);
}

std::optional<Frame> read_frame(const net::Socket& s) {
  char header[2];
  if (!net::read_exact(s, header)) return std::nullopt;
  const auto type = static_cast<std::uint8_t>(header[0]);
  const auto len = static_cast<std::uint8_t>(header[1]);
  if (!is_known(type)) return std::nullopt;
  Frame f{static_cast<FrameType>(type), std::string(len, '\0')};
  if (len > 0 && !net::read_exact(s, f.payload)) return std::nullopt;
  return f;
}

}  // namespace podfed::tunnel
