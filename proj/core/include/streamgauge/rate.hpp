#pragma once

#include <cstdint>
#include <vector>

#include "streamgauge/time.hpp"

namespace streamgauge {

/// One constant-rate stretch of a schedule. rate is aggregate events/second
/// across all generator instances.
struct RateSegment {
  DurationNs duration = 0;
  double rate = 0.0;

  friend bool operator==(const RateSegment&, const RateSegment&) = default;
};

struct RateSchedule {
  std::vector<RateSegment> segments;

  friend bool operator==(const RateSchedule&, const RateSchedule&) = default;

  bool valid() const {
    if (segments.empty()) return false;
    for (const auto& s : segments) {
      if (s.duration <= 0 || s.rate <= 0.0) return false;
    }
    return true;
  }

  DurationNs total_duration() const {
    DurationNs d = 0;
    for (const auto& s : segments) d += s.duration;
    return d;
  }

  double peak_rate() const {
    double r = 0.0;
    for (const auto& s : segments) r = s.rate > r ? s.rate : r;
    return r;
  }

  /// Scheduled rate at an offset from schedule start (events/second).
  double rate_at(DurationNs offset) const;

  /// Integral of the scheduled rate over [a, b), in events.
  double expected_count(DurationNs a, DurationNs b) const;

  static RateSchedule constant(double rate, DurationNs duration) {
    return RateSchedule{{RateSegment{duration, rate}}};
  }
};

/// Token bucket with fractional carry. Tokens accrue continuously at the
/// configured rate and are capped at `burst`; grab() hands out whole tokens.
class TokenBucket {
 public:
  TokenBucket(double rate_per_second, double burst, TimeNs start)
      : rate_per_ns_(rate_per_second / static_cast<double>(kNanosPerSecond)),
        burst_(burst),
        tokens_(0.0),
        last_(start) {}

  std::uint64_t grab(TimeNs now, std::uint64_t want) {
    refill(now);
    const auto avail = static_cast<std::uint64_t>(tokens_);
    const std::uint64_t take = want < avail ? want : avail;
    tokens_ -= static_cast<double>(take);
    return take;
  }

  /// Earliest instant at which at least one whole token is available.
  TimeNs next_ready(TimeNs now) { return next_ready_for(now, 1.0); }

  /// Earliest instant at which `want` tokens are available. Waiting for a
  /// whole burst keeps sleeps around a millisecond, where the scheduler's
  /// wakeup jitter is absorbed by the burst allowance instead of lost.
  TimeNs next_ready_for(TimeNs now, double want) {
    refill(now);
    if (want > burst_) want = burst_;
    if (tokens_ >= want) return now;
    const double deficit = want - tokens_;
    return now + static_cast<DurationNs>(deficit / rate_per_ns_) + 1;
  }

  void set_rate(double rate_per_second, TimeNs now) {
    refill(now);
    rate_per_ns_ = rate_per_second / static_cast<double>(kNanosPerSecond);
  }

 private:
  void refill(TimeNs now) {
    if (now <= last_) return;
    tokens_ += static_cast<double>(now - last_) * rate_per_ns_;
    if (tokens_ > burst_) tokens_ = burst_;
    last_ = now;
  }

  double rate_per_ns_;
  double burst_;
  double tokens_;
  TimeNs last_;
};

}  // namespace streamgauge
