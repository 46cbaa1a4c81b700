#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamgauge/sut.hpp"
#include "streamgauge/time.hpp"

namespace streamgauge {

struct EmptyAfterWarmup : std::runtime_error {
  EmptyAfterWarmup() : std::runtime_error("no samples left after warmup exclusion") {}
};

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

enum class Metric : std::uint8_t {
  event_latency = 0,
  proc_latency = 1,
};

/// Latencies of one output, both computed driver-side from the emission
/// stamp. bucket is the 1-second time-series index relative to run start.
struct LatencySample {
  DurationNs event_latency = 0;
  DurationNs proc_latency = 0;
  std::int64_t bucket = 0;
  bool anomaly = false;  // negative latency or proc > event; excluded from stats
};

/// Fixed-width latency histogram: 1 ms buckets up to 300 s plus an overflow
/// bucket. Exact min/max/sum ride along so avg and range are not quantized.
class Histogram {
 public:
  static constexpr DurationNs kBucketWidth = kNanosPerMilli;
  static constexpr std::size_t kBuckets = 300'000;  // 300 s span

  Histogram() : counts_(kBuckets + 1, 0) {}

  void add(DurationNs v, std::uint64_t count = 1);
  void merge(const Histogram& other);

  std::uint64_t total() const { return total_; }
  DurationNs min() const { return min_; }
  DurationNs max() const { return max_; }
  DurationNs avg() const;
  double stddev() const;

  /// Nearest-rank quantile over bucket lower bounds, clamped into [min, max].
  /// Always within one bucket width of the sort-based quantile.
  DurationNs quantile(double q) const;

  /// Restores exact extrema and moments when the bucket counts were rebuilt
  /// from already-quantized cells.
  void override_exact(std::uint64_t n, DurationNs mn, DurationNs mx, double sum, double sum_sq) {
    if (n == 0) return;
    total_ = n;
    min_ = mn;
    max_ = mx;
    sum_ = sum;
    sum_sq_ = sum_sq;
  }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  DurationNs min_ = 0;
  DurationNs max_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

struct MetricsSummary {
  DurationNs avg = 0;
  DurationNs min = 0;
  DurationNs max = 0;
  DurationNs q90 = 0;
  DurationNs q95 = 0;
  DurationNs q99 = 0;
  double stddev = 0.0;
  std::uint64_t n = 0;
};

MetricsSummary summarize(const Histogram& h);

/// Per-second accumulation for one metric: sparse millisecond histogram plus
/// exact extrema and moments.
struct MetricCell {
  std::unordered_map<std::int32_t, std::uint64_t> ms_hist;
  std::uint64_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  DurationNs min = 0;
  DurationNs max = 0;

  void add(DurationNs v);
  void merge(const MetricCell& other);
};

struct SecondCell {
  std::array<MetricCell, 2> metric;  // indexed by Metric
};

/// Consistent point-in-time view assembled by merging all shards.
struct RawSample {
  TimeNs emission_time = 0;
  DurationNs event_latency = 0;
  DurationNs proc_latency = 0;
};

struct MetricsView {
  std::map<std::int64_t, SecondCell> seconds;
  std::vector<RawSample> raw;  // only populated when raw capture is on
  std::uint64_t recorded = 0;
  std::uint64_t anomalies = 0;

  std::int64_t last_second() const {
    return seconds.empty() ? -1 : seconds.rbegin()->first;
  }
};

struct MetricSeriesPoint {
  std::int64_t second = 0;
  std::uint64_t n = 0;
  DurationNs p50 = 0, p90 = 0, p95 = 0, p99 = 0, avg = 0, min = 0, max = 0;
};

struct DivergenceReport {
  double event_slope = 0.0;  // seconds of latency per second of run time
  double proc_slope = 0.0;
  std::size_t points = 0;
};

/// Computes both latencies per output and accumulates them into sharded
/// per-second cells. record() is thread-safe; each sink worker lands on its
/// own shard, and snapshot() merges frozen shards into one consistent view.
class MetricsEngine {
 public:
  explicit MetricsEngine(TimeNs run_start, bool capture_raw = false)
      : run_start_(run_start), capture_raw_(capture_raw) {}

  LatencySample record(const OutputRecord& rec);

  MetricsView snapshot() const;
  TimeNs run_start() const { return run_start_; }

 private:
  static constexpr std::size_t kShards = 8;

  struct Shard {
    mutable std::mutex mu;
    std::map<std::int64_t, SecondCell> seconds;
    std::vector<RawSample> raw;
    std::uint64_t recorded = 0;
    std::uint64_t anomalies = 0;
  };

  Shard& my_shard();

  TimeNs run_start_;
  bool capture_raw_;
  mutable std::array<Shard, kShards> shards_;
};

/// Dense histogram over all post-warmup seconds of one metric. Warmup is a
/// fraction of the scheduled run duration; run_seconds <= 0 derives the span
/// from the recorded series itself.
Histogram build_histogram(const MetricsView& view, Metric which, double warmup_fraction,
                          double run_seconds = 0.0);

MetricsSummary summarize(const MetricsView& view, Metric which, double warmup_fraction,
                         double run_seconds = 0.0);

std::vector<MetricSeriesPoint> series(const MetricsView& view, Metric which);

/// Least-squares slopes of the per-second median latencies. Requires at
/// least min_seconds of series.
DivergenceReport divergence_report(const MetricsView& view, double min_seconds = 30.0);

/// `emission_ns,event_latency_ns,proc_latency_ns`, sorted by emission.
std::string raw_samples_csv(const MetricsView& view);

/// `second,metric,p50,p90,p95,p99,avg,min,max` with latencies in seconds.
std::string series_csv(const MetricsView& view);

/// Driver-side sink: stamps emission_time with the driver clock on receipt
/// and forwards to the metrics engine. Latency arithmetic never happens in
/// the SUT.
class MeteredSink final : public OutputSink {
 public:
  MeteredSink(ClockFn clock, MetricsEngine* metrics,
              std::function<void(const OutputRecord&)> tap = nullptr)
      : clock_(std::move(clock)), metrics_(metrics), tap_(std::move(tap)) {}

  void emit(const OutputRecord& rec) override;
  void close() { closed_.store(true, std::memory_order_release); }
  std::uint64_t emitted() const { return emitted_.load(std::memory_order_acquire); }
  std::uint64_t dropped_after_close() const { return dropped_.load(std::memory_order_acquire); }

 private:
  ClockFn clock_;
  MetricsEngine* metrics_;
  std::function<void(const OutputRecord&)> tap_;
  std::mutex tap_mu_;
  std::atomic<bool> closed_{false};
  std::atomic<std::uint64_t> emitted_{0};
  std::atomic<std::uint64_t> dropped_{0};
};

}  // namespace streamgauge
