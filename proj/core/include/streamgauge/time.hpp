#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace streamgauge {

/// Nanoseconds since the unix epoch (CLOCK_REALTIME). All driver-side stamps
/// (event_time, ingest_time, emission_time) live on this axis so they are
/// comparable across processes on one host.
using TimeNs = std::int64_t;
using DurationNs = std::int64_t;

inline constexpr TimeNs kTimeUnset = -1;

inline constexpr DurationNs kNanosPerSecond = 1'000'000'000;
inline constexpr DurationNs kNanosPerMilli = 1'000'000;
inline constexpr DurationNs kNanosPerMicro = 1'000;

constexpr DurationNs seconds_ns(double s) {
  return static_cast<DurationNs>(s * static_cast<double>(kNanosPerSecond));
}

constexpr DurationNs millis_ns(double ms) {
  return static_cast<DurationNs>(ms * static_cast<double>(kNanosPerMilli));
}

constexpr double to_seconds(DurationNs d) {
  return static_cast<double>(d) / static_cast<double>(kNanosPerSecond);
}

/// Wall clock reading, nanosecond resolution.
TimeNs now_ns();

/// Clock indirection so tests can substitute synthetic time. The default
/// clock is now_ns(); components stamp timestamps only through this.
using ClockFn = std::function<TimeNs()>;

ClockFn wall_clock();

/// Sleeps until the given wall deadline, busy-waiting for the final stretch
/// so pacing error stays well under the scheduler quantum.
void sleep_until_ns(TimeNs deadline, DurationNs spin_threshold = 100 * kNanosPerMicro);

}  // namespace streamgauge
