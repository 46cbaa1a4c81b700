#include "streamgauge/engine.hpp"

#include <map>
#include <memory>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "support/oracle.hpp"
#include "support/test_util.hpp"
#include "streamgauge/generator.hpp"
#include "streamgauge/rate.hpp"
#include "streamgauge/rng.hpp"

namespace streamgauge {
namespace {

Event purchase(std::uint64_t gem, std::uint64_t price, TimeNs event_time,
               TimeNs ingest_time = kTimeUnset) {
  Event e;
  e.stream = StreamKind::purchases;
  e.user_id = gem * 17;
  e.gem_pack_id = gem;
  e.price_cents = price;
  e.event_time = event_time;
  e.ingest_time = ingest_time;
  return e;
}

TEST(PartitionState, SumsWindowWithMaxTimestamps) {
  // Three purchases of one gem pack at event times 580/590/600 s whose
  // prices sum to 42; a sliding 10-minute window holds all three.
  const WindowSpec spec{600 * kNanosPerSecond, 300 * kNanosPerSecond,
                        TimeSemantics::event_time};
  PartitionState state(QueryKind::agg, spec);
  state.ingest(purchase(5, 15, 580 * kNanosPerSecond, 601 * kNanosPerSecond));
  state.ingest(purchase(5, 13, 590 * kNanosPerSecond, 601 * kNanosPerSecond));
  state.ingest(purchase(5, 14, 600 * kNanosPerSecond, 601 * kNanosPerSecond));

  std::vector<OutputRecord> agg;
  std::vector<std::pair<WindowId, JoinWindowPart>> join;
  state.close_due(900 * kNanosPerSecond, agg, join);

  // Windows [0,600) and [300,900) are due; [300,900) holds all three.
  OutputRecord full{};
  bool found = false;
  for (const OutputRecord& rec : agg) {
    if (rec.window_start == 300 * kNanosPerSecond) {
      full = rec;
      found = true;
    }
  }
  ASSERT_TRUE(found);
  EXPECT_EQ(full.sum_price_cents, 42u);
  EXPECT_EQ(full.max_event_time, 600 * kNanosPerSecond);
  EXPECT_EQ(full.max_ingest_time, 601 * kNanosPerSecond);
  EXPECT_EQ(full.gem_pack_id, 5u);
}

TEST(PartitionState, EventUpdatesEveryContainingWindow) {
  const WindowSpec spec{8, 4, TimeSemantics::event_time};
  PartitionState state(QueryKind::agg, spec);
  state.ingest(purchase(1, 10, 10, 11));
  std::vector<OutputRecord> agg;
  std::vector<std::pair<WindowId, JoinWindowPart>> join;
  state.close_due(100, agg, join);
  ASSERT_EQ(agg.size(), 2u);  // windows starting at 4 and 8
  EXPECT_EQ(agg[0].window_start, 4);
  EXPECT_EQ(agg[1].window_start, 8);
  for (const OutputRecord& rec : agg) EXPECT_EQ(rec.sum_price_cents, 10u);
}

TEST(PartitionState, EmptyWindowEmitsNothing) {
  const WindowSpec spec{8, 4, TimeSemantics::event_time};
  PartitionState state(QueryKind::agg, spec);
  std::vector<OutputRecord> agg;
  std::vector<std::pair<WindowId, JoinWindowPart>> join;
  state.close_due(1000, agg, join);
  EXPECT_TRUE(agg.empty());
}

TEST(PartitionState, BackwardCloseIsFatal) {
  const WindowSpec spec{8, 4, TimeSemantics::event_time};
  PartitionState state(QueryKind::agg, spec);
  std::vector<OutputRecord> agg;
  std::vector<std::pair<WindowId, JoinWindowPart>> join;
  state.close_due(100, agg, join);
  EXPECT_THROW(state.close_due(50, agg, join), std::logic_error);
}

std::vector<Event> synthetic_trace(std::size_t count, std::uint64_t seed,
                                   std::uint64_t key_space, DurationNs spacing) {
  std::vector<Event> events;
  events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Event e;
    e.stream = StreamKind::purchases;
    e.gem_pack_id = bounded(mix64(seed, i * 2), key_space);
    e.user_id = bounded(mix64(seed + 1, i * 2 + 1), key_space);
    e.price_cents = 1 + bounded(mix64(seed + 2, i), 999);
    e.event_time = static_cast<TimeNs>(i) * spacing;
    e.seq = i;
    events.push_back(e);
  }
  return events;
}

struct EngineRun {
  std::vector<OutputRecord> outputs;
  std::vector<Event> trace;
  EngineReport report;
};

EngineRun run_agg_engine(const std::vector<Event>& events, const WindowSpec& spec,
                         std::size_t sources, std::size_t batch_size = 256,
                         std::size_t buffer_size = 1024) {
  std::vector<std::unique_ptr<DriverQueue>> queues;
  std::vector<EventSource*> srcs;
  for (std::size_t i = 0; i < sources; ++i) {
    queues.push_back(std::make_unique<DriverQueue>());
    srcs.push_back(queues.back().get());
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    queues[i % sources]->offer(events[i]);
  }
  for (auto& q : queues) q->close();

  testing::TraceRecorder trace;
  EngineConfig cfg;
  cfg.query = QueryKind::agg;
  cfg.window = spec;
  cfg.batch_size = batch_size;
  cfg.buffer_size = buffer_size;
  cfg.ingest_tap = trace.fn();

  testing::CaptureSink sink;
  ReferenceEngine engine(cfg);
  EngineRun run;
  run.report = engine.run(srcs, sink);
  run.outputs = sink.records();
  run.trace = trace.events();
  return run;
}

void expect_matches_oracle(const EngineRun& run, const WindowSpec& spec) {
  const auto expected = testing::agg_oracle(run.trace, spec, run.report.final_watermark);
  std::map<testing::AggKey, const OutputRecord*> got;
  for (const OutputRecord& rec : run.outputs) {
    const testing::AggKey key{rec.window_start, rec.gem_pack_id};
    ASSERT_EQ(got.count(key), 0u) << "duplicate output for window " << rec.window_start;
    got[key] = &rec;
  }
  ASSERT_EQ(got.size(), expected.size());
  for (const auto& [key, exp] : expected) {
    auto it = got.find(key);
    ASSERT_NE(it, got.end()) << "missing window " << key.first << " key " << key.second;
    EXPECT_EQ(it->second->sum_price_cents, exp.sum);
    EXPECT_EQ(it->second->max_event_time, exp.max_event_time);
    EXPECT_EQ(it->second->max_ingest_time, exp.max_ingest_time);
  }
}

TEST(ReferenceEngine, EventTimeAggregationMatchesBruteForce) {
  // Events spread over ~6 s of event time; sliding (800 ms, 400 ms).
  const WindowSpec spec{millis_ns(800), millis_ns(400), TimeSemantics::event_time};
  const auto events = synthetic_trace(6000, 11, 40, kNanosPerMilli);
  const EngineRun run = run_agg_engine(events, spec, 2);
  EXPECT_EQ(run.report.events_processed, events.size());
  ASSERT_NE(run.report.final_watermark, kTimeUnset);
  expect_matches_oracle(run, spec);
}

TEST(ReferenceEngine, ProcessingTimeAggregationMatchesBruteForce) {
  const WindowSpec spec{millis_ns(80), millis_ns(40), TimeSemantics::processing_time};
  const auto events = synthetic_trace(6000, 13, 40, 10 * kNanosPerMicro);
  const EngineRun run = run_agg_engine(events, spec, 2);
  EXPECT_EQ(run.report.events_processed, events.size());
  expect_matches_oracle(run, spec);
}

TEST(ReferenceEngine, ChunkingDoesNotChangeOutputs) {
  const WindowSpec spec{millis_ns(800), millis_ns(400), TimeSemantics::event_time};
  const auto events = synthetic_trace(4000, 17, 25, kNanosPerMilli);
  const EngineRun a = run_agg_engine(events, spec, 2, 16, 64);
  const EngineRun b = run_agg_engine(events, spec, 2, 1024, 8192);

  const auto key_of = [](const OutputRecord& r) {
    return std::tuple(r.window_start, r.gem_pack_id, r.sum_price_cents, r.max_event_time);
  };
  std::multiset<std::tuple<TimeNs, std::uint64_t, std::uint64_t, TimeNs>> sa, sb;
  for (const auto& r : a.outputs) sa.insert(key_of(r));
  for (const auto& r : b.outputs) sb.insert(key_of(r));
  EXPECT_EQ(sa, sb);
}

TEST(ReferenceEngine, SingleSourceSmoke) {
  const WindowSpec spec{millis_ns(100), millis_ns(100), TimeSemantics::event_time};
  const auto events = synthetic_trace(500, 19, 5, 100 * kNanosPerMicro);
  const EngineRun run = run_agg_engine(events, spec, 1);
  expect_matches_oracle(run, spec);
}

// With the ingest throttled to R and offered 2R the queues must drain at R:
// steady-state take rate within [0.9R, 1.1R] and depth growing about R/s.
TEST(ReferenceEngine, ThrottleExertsBackpressure) {
  constexpr double kCap = 20'000.0;
  EngineConfig cfg;
  cfg.query = QueryKind::agg;
  cfg.window = WindowSpec{millis_ns(400), millis_ns(200), TimeSemantics::event_time};
  cfg.service_rate_cap = kCap;

  DriverQueue q0;
  DriverQueue q1;
  testing::CaptureSink sink;
  ReferenceEngine engine(cfg);
  engine.start({&q0, &q1}, sink);

  GeneratorConfig gen;
  gen.instances = 2;
  gen.seed = 5;
  gen.key_dist = KeyDistribution::make_uniform(64);
  WorkloadGenerator generator(gen, RateSchedule::constant(2 * kCap, 3 * kNanosPerSecond));
  const TimeNs t0 = now_ns();
  generator.start({&q0, &q1});

  std::vector<std::uint64_t> taken;
  for (int s = 1; s <= 3; ++s) {
    sleep_until_ns(t0 + s * kNanosPerSecond);
    taken.push_back(q0.taken_total() + q1.taken_total());
  }
  generator.join();
  engine.stop();
  engine.join();

  const auto take_rate_s2 = static_cast<double>(taken[1] - taken[0]);
  const auto take_rate_s3 = static_cast<double>(taken[2] - taken[1]);
  EXPECT_GE(take_rate_s2, 0.9 * kCap);
  EXPECT_LE(take_rate_s2, 1.1 * kCap);
  EXPECT_GE(take_rate_s3, 0.9 * kCap);
  EXPECT_LE(take_rate_s3, 1.1 * kCap);
}

TEST(ReferenceEngine, StopAbandonsBufferedWork) {
  EngineConfig cfg;
  cfg.query = QueryKind::agg;
  cfg.window = WindowSpec{millis_ns(800), millis_ns(400), TimeSemantics::event_time};
  cfg.service_rate_cap = 100.0;  // far below the offered volume

  DriverQueue q;
  for (const Event& e : synthetic_trace(50'000, 23, 10, kNanosPerMicro)) q.offer(e);
  q.close();

  testing::CaptureSink sink;
  ReferenceEngine engine(cfg);
  engine.start({&q}, sink);
  sleep_until_ns(now_ns() + 100 * kNanosPerMilli);
  const TimeNs stop_at = now_ns();
  engine.stop();
  engine.join();
  EXPECT_LT(now_ns() - stop_at, 500 * kNanosPerMilli);
  EXPECT_LT(q.taken_total(), 50'000u);
}

}  // namespace
}  // namespace streamgauge
