#include "streamgauge/rate.hpp"

namespace streamgauge {

double RateSchedule::rate_at(DurationNs offset) const {
  DurationNs at = 0;
  for (const auto& s : segments) {
    if (offset < at + s.duration) return s.rate;
    at += s.duration;
  }
  return segments.empty() ? 0.0 : segments.back().rate;
}

double RateSchedule::expected_count(DurationNs a, DurationNs b) const {
  double count = 0.0;
  DurationNs at = 0;
  for (const auto& s : segments) {
    const DurationNs lo = a > at ? a : at;
    const DurationNs hi = b < at + s.duration ? b : at + s.duration;
    if (hi > lo) count += to_seconds(hi - lo) * s.rate;
    at += s.duration;
  }
  return count;
}

}  // namespace streamgauge
