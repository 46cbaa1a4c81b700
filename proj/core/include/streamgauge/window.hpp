#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "streamgauge/time.hpp"

namespace streamgauge {

enum class TimeSemantics : std::uint8_t {
  event_time = 0,
  processing_time = 1,
};

/// Sliding-window parameters. slide == range gives a tumbling window.
struct WindowSpec {
  DurationNs range = 0;
  DurationNs slide = 0;
  TimeSemantics semantics = TimeSemantics::event_time;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;

  bool valid() const { return range > 0 && slide > 0 && slide <= range; }
  /// Number of windows any single timestamp belongs to: ceil(range / slide).
  std::int64_t windows_per_timestamp() const { return (range + slide - 1) / slide; }
};

/// A concrete window instance [start, start + range). Starts are aligned to
/// origin 0 (start % slide == 0) and may be negative.
struct WindowId {
  TimeNs start = 0;
  TimeNs end = 0;

  friend bool operator==(const WindowId&, const WindowId&) = default;
  friend auto operator<=>(const WindowId&, const WindowId&) = default;
};

/// All origin-aligned windows containing t, ascending by start. Appends into
/// out (cleared first) so hot loops can reuse the buffer.
void assign_windows(TimeNs t, const WindowSpec& spec, std::vector<WindowId>& out);

inline std::vector<WindowId> assign_windows(TimeNs t, const WindowSpec& spec) {
  std::vector<WindowId> out;
  assign_windows(t, spec, out);
  return out;
}

/// Floor division (quotient rounded toward negative infinity).
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Largest aligned window start <= t.
constexpr TimeNs align_down(TimeNs t, DurationNs slide) { return floor_div(t, slide) * slide; }

}  // namespace streamgauge
