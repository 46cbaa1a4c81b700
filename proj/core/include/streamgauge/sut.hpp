#pragma once

#include <cstdint>
#include <string>

#include "streamgauge/time.hpp"

namespace streamgauge {

enum class QueryKind : std::uint8_t {
  agg = 0,
  join = 1,
};

/// A SUT result tuple. The SUT fills query, payload and the two contributor
/// maxima; emission_time is stamped by the driver-side sink on receipt and
/// is never trusted from the SUT.
struct OutputRecord {
  QueryKind query = QueryKind::agg;

  // agg payload
  std::uint64_t gem_pack_id = 0;
  std::uint64_t sum_price_cents = 0;
  TimeNs window_start = 0;
  std::uint64_t contributors = 0;  // diagnostic only; not on the wire

  // join payload (gem_pack_id shared with agg)
  std::uint64_t user_id = 0;
  std::uint64_t price_cents = 0;

  TimeNs max_event_time = kTimeUnset;
  TimeNs max_ingest_time = kTimeUnset;
  TimeNs emission_time = kTimeUnset;
};

enum class SutMode : std::uint8_t {
  in_process = 0,
  remote = 1,
};

struct SutDescriptor {
  std::string name = "reference";
  SutMode mode = SutMode::in_process;
  std::uint32_t sources = 2;
  std::string address;  // host:port, remote mode only

  friend bool operator==(const SutDescriptor&, const SutDescriptor&) = default;
};

/// Driver-side output receiver. Implementations must be thread-safe; SUT
/// workers may emit concurrently.
class OutputSink {
 public:
  virtual ~OutputSink() = default;
  virtual void emit(const OutputRecord& rec) = 0;
};

}  // namespace streamgauge
