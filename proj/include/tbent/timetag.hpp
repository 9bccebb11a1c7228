#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

namespace tbent {

/// Wire codes of the binary and CSV stream formats.
enum class Channel : std::uint8_t { Trigger = 0, Signal = 1, Idler = 2 };

std::string_view channel_name(Channel c);

/// One detection event, picoseconds since run start.
struct TimeTag {
  Channel channel = Channel::Trigger;
  std::uint64_t timestamp_ps = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Receives consecutive, time-sorted batches of a stream.
using TagSink = std::function<void(std::span<const TimeTag>)>;

}  // namespace tbent
