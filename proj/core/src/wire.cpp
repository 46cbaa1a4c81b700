#include "streamgauge/wire.hpp"

namespace streamgauge::wire {

namespace {

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
  buf.push_back(static_cast<std::uint8_t>(v));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

/// Reserves the frame header, returning the offset where the length goes.
std::size_t begin_frame(std::vector<std::uint8_t>& buf, FrameType type) {
  const std::size_t at = buf.size();
  put_u32(buf, 0);
  buf.push_back(static_cast<std::uint8_t>(type));
  return at;
}

void end_frame(std::vector<std::uint8_t>& buf, std::size_t at) {
  const auto len = static_cast<std::uint32_t>(buf.size() - at - 4);
  for (int i = 0; i < 4; ++i) buf[at + i] = static_cast<std::uint8_t>(len >> (8 * i));
}

struct Cursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw ProtocolError("truncated frame body");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data[pos]) |
                            static_cast<std::uint16_t>(data[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  void done() const {
    if (pos != data.size()) throw ProtocolError("trailing bytes in frame body");
  }
};

}  // namespace

void append_hello(std::vector<std::uint8_t>& buf, const HelloFrame& f) {
  const std::size_t at = begin_frame(buf, FrameType::hello);
  put_u16(buf, f.version);
  put_u16(buf, f.n_sources);
  end_frame(buf, at);
}

void append_pull(std::vector<std::uint8_t>& buf, const PullFrame& f) {
  const std::size_t at = begin_frame(buf, FrameType::pull);
  put_u16(buf, f.source_id);
  put_u32(buf, f.max_n);
  end_frame(buf, at);
}

void append_events(std::vector<std::uint8_t>& buf, std::uint16_t source_id,
                   std::span<const Event> events) {
  const std::size_t at = begin_frame(buf, FrameType::events);
  put_u16(buf, source_id);
  put_u32(buf, static_cast<std::uint32_t>(events.size()));
  for (const Event& e : events) {
    buf.push_back(static_cast<std::uint8_t>(e.stream));
    put_u64(buf, e.user_id);
    put_u64(buf, e.gem_pack_id);
    put_u64(buf, e.price_cents);
    put_u64(buf, static_cast<std::uint64_t>(e.event_time));
    put_u64(buf, e.seq);
  }
  end_frame(buf, at);
}

void append_output(std::vector<std::uint8_t>& buf, const OutputRecord& rec) {
  const std::size_t at = begin_frame(buf, FrameType::output);
  buf.push_back(static_cast<std::uint8_t>(rec.query));
  if (rec.query == QueryKind::agg) {
    put_u64(buf, rec.gem_pack_id);
    put_u64(buf, rec.sum_price_cents);
    put_u64(buf, static_cast<std::uint64_t>(rec.window_start));
  } else {
    put_u64(buf, rec.user_id);
    put_u64(buf, rec.gem_pack_id);
    put_u64(buf, rec.price_cents);
  }
  put_u64(buf, static_cast<std::uint64_t>(rec.max_event_time));
  put_u64(buf, static_cast<std::uint64_t>(rec.max_ingest_time));
  end_frame(buf, at);
}

void append_empty(std::vector<std::uint8_t>& buf, FrameType type) {
  const std::size_t at = begin_frame(buf, type);
  end_frame(buf, at);
}

HelloFrame parse_hello(std::span<const std::uint8_t> body) {
  Cursor c{body};
  HelloFrame f;
  f.version = c.u16();
  f.n_sources = c.u16();
  c.done();
  return f;
}

PullFrame parse_pull(std::span<const std::uint8_t> body) {
  Cursor c{body};
  PullFrame f;
  f.source_id = c.u16();
  f.max_n = c.u32();
  c.done();
  return f;
}

EventsFrame parse_events(std::span<const std::uint8_t> body) {
  Cursor c{body};
  EventsFrame f;
  f.source_id = c.u16();
  const std::uint32_t n = c.u32();
  if (static_cast<std::size_t>(n) * kWireEventBytes != body.size() - 6) {
    throw ProtocolError("events frame size mismatch");
  }
  f.events.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Event e;
    const std::uint8_t stream = c.u8();
    if (stream > 1) throw ProtocolError("bad stream tag");
    e.stream = static_cast<StreamKind>(stream);
    e.user_id = c.u64();
    e.gem_pack_id = c.u64();
    e.price_cents = c.u64();
    e.event_time = static_cast<TimeNs>(c.u64());
    e.seq = c.u64();
    f.events.push_back(e);
  }
  c.done();
  return f;
}

OutputRecord parse_output(std::span<const std::uint8_t> body) {
  Cursor c{body};
  OutputRecord rec;
  const std::uint8_t query = c.u8();
  if (query > 1) throw ProtocolError("bad query tag");
  rec.query = static_cast<QueryKind>(query);
  if (rec.query == QueryKind::agg) {
    rec.gem_pack_id = c.u64();
    rec.sum_price_cents = c.u64();
    rec.window_start = static_cast<TimeNs>(c.u64());
  } else {
    rec.user_id = c.u64();
    rec.gem_pack_id = c.u64();
    rec.price_cents = c.u64();
  }
  rec.max_event_time = static_cast<TimeNs>(c.u64());
  rec.max_ingest_time = static_cast<TimeNs>(c.u64());
  c.done();
  return rec;
}

}  // namespace streamgauge::wire
