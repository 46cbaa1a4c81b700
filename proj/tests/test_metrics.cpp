#include "streamgauge/metrics.hpp"

#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "support/oracle.hpp"
#include "support/test_util.hpp"

namespace streamgauge {
namespace {

OutputRecord rec_at(TimeNs max_event, TimeNs max_ingest, TimeNs emission) {
  OutputRecord r;
  r.max_event_time = max_event;
  r.max_ingest_time = max_ingest;
  r.emission_time = emission;
  return r;
}

TEST(MetricsEngine, LatenciesFromWindowedTimestamps) {
  MetricsEngine m(0);
  // Window max event-time 600, ingested right after 601, emitted at 610.
  const LatencySample s = m.record(rec_at(600 * kNanosPerSecond, 601 * kNanosPerSecond,
                                          610 * kNanosPerSecond));
  EXPECT_EQ(s.event_latency, 10 * kNanosPerSecond);
  EXPECT_EQ(s.proc_latency, 9 * kNanosPerSecond);
  EXPECT_FALSE(s.anomaly);
  EXPECT_EQ(s.bucket, 610);
}

TEST(MetricsEngine, ZeroLatencyIdentityCase) {
  MetricsEngine m(0);
  const LatencySample s = m.record(rec_at(5, 5, 5));
  EXPECT_EQ(s.event_latency, 0);
  EXPECT_EQ(s.proc_latency, 0);
  EXPECT_FALSE(s.anomaly);
}

TEST(MetricsEngine, NegativeOrInvertedLatencyIsAnomaly) {
  MetricsEngine m(0);
  EXPECT_TRUE(m.record(rec_at(100, 90, 50)).anomaly);   // negative
  EXPECT_TRUE(m.record(rec_at(100, 60, 120)).anomaly);  // proc > event
  const MetricsView view = m.snapshot();
  EXPECT_EQ(view.anomalies, 2u);
  EXPECT_EQ(view.recorded, 0u);
}

TEST(Histogram, NearestRankQuantiles) {
  Histogram h;
  for (int ms = 1; ms <= 100; ++ms) h.add(ms * kNanosPerMilli);
  EXPECT_EQ(h.quantile(0.90), 90 * kNanosPerMilli);
  EXPECT_EQ(h.quantile(0.95), 95 * kNanosPerMilli);
  EXPECT_EQ(h.quantile(0.99), 99 * kNanosPerMilli);
  EXPECT_EQ(h.min(), kNanosPerMilli);
  EXPECT_EQ(h.max(), 100 * kNanosPerMilli);
  const MetricsSummary s = summarize(h);
  EXPECT_LE(s.q90, s.q95);
  EXPECT_LE(s.q95, s.q99);
  EXPECT_LE(s.q99, s.max);
  EXPECT_GE(s.avg, s.min);
  EXPECT_LE(s.avg, s.max);
}

TEST(Histogram, QuantileWithinOneMillisecondOfSorted) {
  Histogram h;
  std::vector<DurationNs> values;
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> dist(3.0, 1.0);  // milliseconds
  for (int i = 0; i < 1'000'000; ++i) {
    const auto v = static_cast<DurationNs>(dist(rng) * kNanosPerMilli);
    values.push_back(v);
    h.add(v);
  }
  for (const double q : {0.90, 0.95, 0.99}) {
    const DurationNs exact = testing::sorted_quantile(values, q);
    EXPECT_LE(std::abs(h.quantile(q) - exact), kNanosPerMilli) << "q=" << q;
  }
}

TEST(Histogram, OverflowBucketClampsToMax) {
  Histogram h;
  h.add(400 * kNanosPerSecond);  // beyond the 300 s span
  h.add(10 * kNanosPerMilli);
  EXPECT_EQ(h.quantile(0.99), 400 * kNanosPerSecond);
  EXPECT_EQ(h.total(), 2u);
}

TEST(Metrics, WarmupExcludesEarlyBuckets) {
  MetricsEngine m(0);
  // Seconds 0..9, one sample per second with latency (second+1) ms.
  for (int sec = 0; sec < 10; ++sec) {
    const TimeNs base = sec * kNanosPerSecond;
    m.record(rec_at(base, base, base + (sec + 1) * kNanosPerMilli));
  }
  const MetricsView view = m.snapshot();
  const MetricsSummary all = summarize(view, Metric::event_latency, 0.0, 10.0);
  EXPECT_EQ(all.n, 10u);
  const MetricsSummary tail = summarize(view, Metric::event_latency, 0.25, 10.0);
  EXPECT_EQ(tail.n, 7u);  // seconds 3..9 remain
  EXPECT_EQ(tail.min, 4 * kNanosPerMilli);
  EXPECT_THROW(summarize(view, Metric::event_latency, 0.999, 10.0), EmptyAfterWarmup);
}

TEST(Metrics, SummaryIsOrderInsensitive) {
  std::vector<DurationNs> latencies;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    latencies.push_back(static_cast<DurationNs>(rng() % (50 * kNanosPerMilli)));
  }
  MetricsEngine a(0);
  MetricsEngine b(0);
  for (const DurationNs v : latencies) a.record(rec_at(0, 0, v));
  std::shuffle(latencies.begin(), latencies.end(), rng);
  for (const DurationNs v : latencies) b.record(rec_at(0, 0, v));
  const MetricsSummary sa = summarize(a.snapshot(), Metric::event_latency, 0.0, 1.0);
  const MetricsSummary sb = summarize(b.snapshot(), Metric::event_latency, 0.0, 1.0);
  EXPECT_EQ(sa.q90, sb.q90);
  EXPECT_EQ(sa.q99, sb.q99);
  EXPECT_EQ(sa.min, sb.min);
  EXPECT_EQ(sa.max, sb.max);
  EXPECT_EQ(sa.avg, sb.avg);
  EXPECT_EQ(sa.n, sb.n);
}

TEST(Metrics, ShardedRecordingMergesConsistently) {
  MetricsEngine m(0);
  constexpr int kThreads = 4;
  constexpr int kPerThread = 20'000;
  std::vector<std::thread> workers;
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&m, t] {
      for (int i = 0; i < kPerThread; ++i) {
        m.record(rec_at(0, 0, ((t + i) % 97 + 1) * kNanosPerMilli));
      }
    });
  }
  for (auto& w : workers) w.join();
  const MetricsView view = m.snapshot();
  EXPECT_EQ(view.recorded, static_cast<std::uint64_t>(kThreads) * kPerThread);
  std::uint64_t total = 0;
  for (const auto& [sec, cell] : view.seconds) total += cell.metric[0].n;
  EXPECT_EQ(total, view.recorded);
}

TEST(Divergence, ConstantSeriesHasZeroSlopes) {
  MetricsEngine m(0);
  for (int sec = 0; sec < 40; ++sec) {
    for (int i = 0; i < 5; ++i) {
      const TimeNs base = sec * kNanosPerSecond;
      m.record(rec_at(base, base, base + 25 * kNanosPerMilli));
    }
  }
  const DivergenceReport d = divergence_report(m.snapshot(), 30.0);
  EXPECT_NEAR(d.event_slope, 0.0, 1e-12);
  EXPECT_NEAR(d.proc_slope, 0.0, 1e-12);
}

TEST(Divergence, GrowingEventLatencyShowsPositiveSlope) {
  MetricsEngine m(0);
  for (int sec = 0; sec < 60; ++sec) {
    const TimeNs emission = sec * kNanosPerSecond + 500 * kNanosPerMilli;
    // Event latency grows ~0.5 s/s; proc latency stays at 20 ms.
    const TimeNs max_event = emission - sec * (kNanosPerSecond / 2);
    m.record(rec_at(max_event, emission - 20 * kNanosPerMilli, emission));
  }
  const DivergenceReport d = divergence_report(m.snapshot(), 30.0);
  EXPECT_NEAR(d.event_slope, 0.5, 0.01);
  EXPECT_NEAR(d.proc_slope, 0.0, 0.001);
}

TEST(Divergence, InsufficientDataThrows) {
  MetricsEngine m(0);
  for (int sec = 0; sec < 10; ++sec) m.record(rec_at(0, 0, sec * kNanosPerSecond));
  EXPECT_THROW(divergence_report(m.snapshot(), 30.0), InsufficientData);
}

TEST(MeteredSink, StampsEmissionWithDriverClock) {
  testing::SyntheticClock clock(610 * kNanosPerSecond);
  MetricsEngine m(0);
  std::vector<OutputRecord> seen;
  MeteredSink sink(clock.fn(), &m, [&](const OutputRecord& r) { seen.push_back(r); });
  OutputRecord rec;
  rec.max_event_time = 600 * kNanosPerSecond;
  rec.max_ingest_time = 601 * kNanosPerSecond;
  sink.emit(rec);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].emission_time, 610 * kNanosPerSecond);
  sink.close();
  sink.emit(rec);
  EXPECT_EQ(sink.dropped_after_close(), 1u);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(Metrics, RawCaptureBehindFlag) {
  MetricsEngine off(0);
  off.record(rec_at(0, 0, 5 * kNanosPerMilli));
  EXPECT_TRUE(off.snapshot().raw.empty());

  MetricsEngine on(0, /*capture_raw=*/true);
  on.record(rec_at(0, 0, 5 * kNanosPerMilli));
  on.record(rec_at(0, 0, 9 * kNanosPerMilli));
  const MetricsView view = on.snapshot();
  ASSERT_EQ(view.raw.size(), 2u);
  EXPECT_EQ(view.raw[0].event_latency, 5 * kNanosPerMilli);
  const std::string csv = raw_samples_csv(view);
  EXPECT_TRUE(csv.starts_with("emission_ns,event_latency_ns,proc_latency_ns\n"));
  EXPECT_NE(csv.find("5000000,5000000,5000000"), std::string::npos);
}

TEST(SeriesCsv, SchemaAndPerSecondRows) {
  MetricsEngine m(0);
  m.record(rec_at(0, 0, 10 * kNanosPerMilli));
  m.record(rec_at(0, 0, kNanosPerSecond + 20 * kNanosPerMilli));
  const std::string csv = series_csv(m.snapshot());
  EXPECT_TRUE(csv.starts_with("second,metric,p50,p90,p95,p99,avg,min,max\n"));
  EXPECT_NE(csv.find("0,event,"), std::string::npos);
  EXPECT_NE(csv.find("1,proc,"), std::string::npos);
}

}  // namespace
}  // namespace streamgauge
