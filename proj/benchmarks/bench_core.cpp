#include <benchmark/benchmark.h>

#include "streamgauge/engine.hpp"
#include "streamgauge/generator.hpp"
#include "streamgauge/key_distribution.hpp"
#include "streamgauge/metrics.hpp"
#include "streamgauge/window.hpp"
#include "streamgauge/wire.hpp"

namespace {

using namespace streamgauge;

void BM_AssignWindows(benchmark::State& state) {
  const WindowSpec spec{millis_ns(800), millis_ns(static_cast<double>(state.range(0))),
                        TimeSemantics::event_time};
  std::vector<WindowId> scratch;
  TimeNs t = 0;
  for (auto _ : state) {
    assign_windows(t, spec, scratch);
    benchmark::DoNotOptimize(scratch.data());
    t += 1'000'000;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AssignWindows)->Arg(800)->Arg(400)->Arg(100);

void BM_DrawKeyNormal(benchmark::State& state) {
  const KeyDistribution dist = KeyDistribution::make_normal(10'000, 5'000.0, 1'000.0);
  std::uint64_t seq = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(draw_key(seq++, dist, 42));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DrawKeyNormal);

void BM_MakeEvent(benchmark::State& state) {
  GeneratorConfig cfg;
  std::uint64_t seq = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_event(cfg, 0, seq++));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MakeEvent);

void BM_PartitionIngest(benchmark::State& state) {
  const WindowSpec spec{millis_ns(800), millis_ns(400), TimeSemantics::event_time};
  GeneratorConfig cfg;
  cfg.key_dist = KeyDistribution::make_uniform(static_cast<std::uint64_t>(state.range(0)));
  std::vector<Event> events;
  for (std::uint64_t i = 0; i < 100'000; ++i) {
    Event e = make_event(cfg, 0, i);
    e.event_time = static_cast<TimeNs>(i) * 10'000;
    e.ingest_time = e.event_time;
    events.push_back(e);
  }
  std::vector<OutputRecord> agg_out;
  std::vector<std::pair<WindowId, JoinWindowPart>> join_out;
  for (auto _ : state) {
    PartitionState partition(QueryKind::agg, spec);
    for (const Event& e : events) partition.ingest(e);
    agg_out.clear();
    join_out.clear();
    partition.close_due(events.back().event_time + spec.range, agg_out, join_out);
    benchmark::DoNotOptimize(agg_out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_PartitionIngest)->Arg(100)->Arg(10'000)->Unit(benchmark::kMillisecond);

void BM_HistogramRecord(benchmark::State& state) {
  MetricsEngine metrics(0);
  OutputRecord rec;
  rec.max_event_time = 0;
  rec.max_ingest_time = 1'000'000;
  TimeNs t = 2'000'000;
  for (auto _ : state) {
    rec.emission_time = t;
    benchmark::DoNotOptimize(metrics.record(rec));
    t += 31'000;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HistogramRecord);

void BM_WireEventsRoundTrip(benchmark::State& state) {
  GeneratorConfig cfg;
  std::vector<Event> events;
  for (std::uint64_t i = 0; i < 1024; ++i) events.push_back(make_event(cfg, 0, i));
  std::vector<std::uint8_t> buf;
  for (auto _ : state) {
    buf.clear();
    wire::append_events(buf, 0, events);
    const wire::EventsFrame frame =
        wire::parse_events(std::span<const std::uint8_t>(buf).subspan(5));
    benchmark::DoNotOptimize(frame.events.data());
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_WireEventsRoundTrip);

}  // namespace

BENCHMARK_MAIN();
