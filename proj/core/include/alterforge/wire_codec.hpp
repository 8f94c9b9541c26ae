#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "alterforge/motion_engine.hpp"

// Serial framing for a pose stream. Every frame is four bytes:
//
//   +------+------+-------+----------------+
//   | 0xA5 | axis | value | axis XOR value |
//   +------+------+-------+----------------+
//
// Payload bytes may equal the sync byte; the fixed length, the 1..43 axis
// range and the checksum are what re-acquire alignment after corruption.

namespace alterforge {

inline constexpr std::uint8_t kFrameSync = 0xA5;
inline constexpr std::size_t kFrameSize = 4;

struct WireFrame {
  std::uint8_t axis = 1;
  std::uint8_t value = 0;

  std::uint8_t checksum() const noexcept { return static_cast<std::uint8_t>(axis ^ value); }
  std::array<std::uint8_t, kFrameSize> bytes() const noexcept {
    return {kFrameSync, axis, value, checksum()};
  }
  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

// All 43 axes for the first sample, then only axes whose value changed since
// the previous sample, ascending by axis within a tick.
std::vector<WireFrame> encode_frames(const Trace& trace);

std::vector<std::uint8_t> frames_to_bytes(std::span<const WireFrame> frames);

struct DecodeResult {
  std::vector<WireFrame> frames;
  // Number of times the decoder lost lock and had to hunt for the next sync.
  std::size_t resyncs = 0;
};

DecodeResult decode_frames(std::span<const std::uint8_t> bytes);

void write_frames(std::ostream& sink, std::span<const WireFrame> frames);

}  // namespace alterforge
