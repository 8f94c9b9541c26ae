#include "alterforge/wire_codec.hpp"

#include <ostream>

namespace alterforge {

std::vector<WireFrame> encode_frames(const Trace& trace) {
  std::vector<WireFrame> frames;
  const Pose* previous = nullptr;
  for (const auto& sample : trace.samples) {
    const auto values = sample.pose.values();
    for (std::size_t a = 0; a < values.size(); ++a) {
      if (previous == nullptr || previous->values()[a] != values[a]) {
        frames.push_back(WireFrame{static_cast<std::uint8_t>(a + 1), values[a]});
      }
    }
    previous = &sample.pose;
  }
  return frames;
}

std::vector<std::uint8_t> frames_to_bytes(std::span<const WireFrame> frames) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(frames.size() * kFrameSize);
  for (const auto& frame : frames) {
    const auto b = frame.bytes();
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  return bytes;
}

DecodeResult decode_frames(std::span<const std::uint8_t> bytes) {
  DecodeResult result;
  bool locked = true;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const bool frame_ok = i + kFrameSize <= bytes.size() && bytes[i] == kFrameSync &&
                          AxisId::valid(bytes[i + 1]) &&
                          static_cast<std::uint8_t>(bytes[i + 1] ^ bytes[i + 2]) == bytes[i + 3];
    if (frame_ok) {
      result.frames.push_back(WireFrame{bytes[i + 1], bytes[i + 2]});
      i += kFrameSize;
      locked = true;
      continue;
    }
    // Mismatch: slide one byte and hunt for the next valid frame.
    if (locked) {
      ++result.resyncs;
      locked = false;
    }
    ++i;
  }
  return result;
}

void write_frames(std::ostream& sink, std::span<const WireFrame> frames) {
  for (const auto& frame : frames) {
    const auto b = frame.bytes();
    sink.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
}

}  // namespace alterforge
