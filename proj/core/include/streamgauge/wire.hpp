#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "streamgauge/event.hpp"
#include "streamgauge/sut.hpp"

namespace streamgauge::wire {

/// Framed binary protocol between driver and out-of-process SUTs. All
/// integers little-endian. Frame layout: u32 length of (type + body),
/// u8 type, body. Sources are pull-based: the SUT sends PULL, the driver
/// answers with EVENTS (possibly empty), the SUT reports results as OUTPUT
/// frames, the driver signals end of generation with EOS and the SUT
/// finishes with BYE.
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 16 * 1024 * 1024;
inline constexpr std::size_t kWireEventBytes = 41;

enum class FrameType : std::uint8_t {
  hello = 0x01,  // u16 version, u16 n_sources
  pull = 0x02,   // u16 source_id, u32 max_n
  events = 0x03, // u16 source_id, u32 n, n * Event
  output = 0x04, // u8 query, payload, u64 max_event_time, u64 max_ingest_time
  eos = 0x05,
  bye = 0x06,
};

struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

struct HandshakeVersionMismatch : std::runtime_error {
  HandshakeVersionMismatch(std::uint16_t theirs, std::uint16_t ours)
      : std::runtime_error("protocol version mismatch: peer " + std::to_string(theirs) +
                           ", local " + std::to_string(ours)) {}
};

struct HelloFrame {
  std::uint16_t version = kProtocolVersion;
  std::uint16_t n_sources = 0;
};

struct PullFrame {
  std::uint16_t source_id = 0;
  std::uint32_t max_n = 0;
};

struct EventsFrame {
  std::uint16_t source_id = 0;
  std::vector<Event> events;
};

void append_hello(std::vector<std::uint8_t>& buf, const HelloFrame& f);
void append_pull(std::vector<std::uint8_t>& buf, const PullFrame& f);
void append_events(std::vector<std::uint8_t>& buf, std::uint16_t source_id,
                   std::span<const Event> events);
void append_output(std::vector<std::uint8_t>& buf, const OutputRecord& rec);
void append_empty(std::vector<std::uint8_t>& buf, FrameType type);  // EOS / BYE

/// Body decoders; the caller has already split off the 5-byte frame header.
/// All throw ProtocolError on a malformed body.
HelloFrame parse_hello(std::span<const std::uint8_t> body);
PullFrame parse_pull(std::span<const std::uint8_t> body);
EventsFrame parse_events(std::span<const std::uint8_t> body);
OutputRecord parse_output(std::span<const std::uint8_t> body);

}  // namespace streamgauge::wire
