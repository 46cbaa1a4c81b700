#pragma once

#include <cstdint>

#include "streamgauge/time.hpp"

namespace streamgauge {

enum class StreamKind : std::uint8_t {
  purchases = 0,
  ads = 1,
};

/// One generated stream tuple. Produced by the workload generator with
/// event_time stamped at emission; ingest_time stays unset until the SUT's
/// source operator stamps it.
struct Event {
  StreamKind stream = StreamKind::purchases;
  std::uint64_t user_id = 0;
  std::uint64_t gem_pack_id = 0;
  std::uint64_t price_cents = 0;  // always 0 for ads
  TimeNs event_time = kTimeUnset;
  TimeNs ingest_time = kTimeUnset;
  std::uint64_t seq = 0;

  bool has_ingest_time() const { return ingest_time != kTimeUnset; }
};

inline bool same_payload(const Event& a, const Event& b) {
  return a.stream == b.stream && a.user_id == b.user_id && a.gem_pack_id == b.gem_pack_id &&
         a.price_cents == b.price_cents && a.seq == b.seq;
}

}  // namespace streamgauge
