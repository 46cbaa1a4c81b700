#include "streamgauge/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace streamgauge {

namespace {

std::int32_t ms_bucket(DurationNs v) {
  const DurationNs b = v / Histogram::kBucketWidth;
  if (b >= static_cast<DurationNs>(Histogram::kBuckets)) {
    return static_cast<std::int32_t>(Histogram::kBuckets);
  }
  return static_cast<std::int32_t>(b);
}

// Quantiles report the bucket lower bound (clamped into [min, max]): exact
// for whole-millisecond samples and within one bucket of the sort-based
// value otherwise.
DurationNs bucket_value(std::int32_t bucket) {
  return static_cast<DurationNs>(bucket) * Histogram::kBucketWidth;
}

DurationNs clampd(DurationNs v, DurationNs lo, DurationNs hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace

void Histogram::add(DurationNs v, std::uint64_t count) {
  if (count == 0) return;
  counts_[static_cast<std::size_t>(ms_bucket(v))] += count;
  if (total_ == 0 || v < min_) min_ = v;
  if (total_ == 0 || v > max_) max_ = v;
  total_ += count;
  sum_ += static_cast<double>(v) * static_cast<double>(count);
  sum_sq_ += static_cast<double>(v) * static_cast<double>(v) * static_cast<double>(count);
}

void Histogram::merge(const Histogram& other) {
  if (other.total_ == 0) return;
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  if (total_ == 0 || other.min_ < min_) min_ = other.min_;
  if (total_ == 0 || other.max_ > max_) max_ = other.max_;
  total_ += other.total_;
  sum_ += other.sum_;
  sum_sq_ += other.sum_sq_;
}

DurationNs Histogram::avg() const {
  if (total_ == 0) return 0;
  return static_cast<DurationNs>(sum_ / static_cast<double>(total_));
}

double Histogram::stddev() const {
  if (total_ < 2) return 0.0;
  const double n = static_cast<double>(total_);
  const double var = (sum_sq_ - sum_ * sum_ / n) / n;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

DurationNs Histogram::quantile(double q) const {
  if (total_ == 0) return 0;
  const auto rank = static_cast<std::uint64_t>(std::ceil(q * static_cast<double>(total_)));
  const std::uint64_t target = rank == 0 ? 1 : rank;
  std::uint64_t cum = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    cum += counts_[i];
    if (cum >= target) {
      if (i == kBuckets) return max_;  // overflow bucket
      return clampd(bucket_value(static_cast<std::int32_t>(i)), min_, max_);
    }
  }
  return max_;
}

MetricsSummary summarize(const Histogram& h) {
  if (h.total() == 0) throw EmptyAfterWarmup();
  MetricsSummary s;
  s.avg = h.avg();
  s.min = h.min();
  s.max = h.max();
  s.q90 = h.quantile(0.90);
  s.q95 = h.quantile(0.95);
  s.q99 = h.quantile(0.99);
  s.stddev = h.stddev();
  s.n = h.total();
  return s;
}

void MetricCell::add(DurationNs v) {
  ms_hist[ms_bucket(v)] += 1;
  if (n == 0 || v < min) min = v;
  if (n == 0 || v > max) max = v;
  ++n;
  sum += static_cast<double>(v);
  sum_sq += static_cast<double>(v) * static_cast<double>(v);
}

void MetricCell::merge(const MetricCell& other) {
  if (other.n == 0) return;
  for (const auto& [b, c] : other.ms_hist) ms_hist[b] += c;
  if (n == 0 || other.min < min) min = other.min;
  if (n == 0 || other.max > max) max = other.max;
  n += other.n;
  sum += other.sum;
  sum_sq += other.sum_sq;
}

MetricsEngine::Shard& MetricsEngine::my_shard() {
  static std::atomic<std::size_t> next{0};
  thread_local const std::size_t idx = next.fetch_add(1, std::memory_order_relaxed) % kShards;
  return shards_[idx];
}

LatencySample MetricsEngine::record(const OutputRecord& rec) {
  LatencySample s;
  s.event_latency = rec.emission_time - rec.max_event_time;
  s.proc_latency = rec.emission_time - rec.max_ingest_time;
  TimeNs rel = rec.emission_time - run_start_;
  if (rel < 0) rel = 0;
  s.bucket = rel / kNanosPerSecond;
  s.anomaly = s.event_latency < 0 || s.proc_latency < 0 || s.proc_latency > s.event_latency;

  Shard& shard = my_shard();
  std::lock_guard<std::mutex> lk(shard.mu);
  if (s.anomaly) {
    ++shard.anomalies;
    return s;
  }
  ++shard.recorded;
  SecondCell& cell = shard.seconds[s.bucket];
  cell.metric[static_cast<std::size_t>(Metric::event_latency)].add(s.event_latency);
  cell.metric[static_cast<std::size_t>(Metric::proc_latency)].add(s.proc_latency);
  if (capture_raw_) {
    shard.raw.push_back(RawSample{rec.emission_time, s.event_latency, s.proc_latency});
  }
  return s;
}

MetricsView MetricsEngine::snapshot() const {
  MetricsView view;
  for (const Shard& shard : shards_) {
    std::lock_guard<std::mutex> lk(shard.mu);
    view.recorded += shard.recorded;
    view.anomalies += shard.anomalies;
    for (const auto& [sec, cell] : shard.seconds) {
      SecondCell& dst = view.seconds[sec];
      dst.metric[0].merge(cell.metric[0]);
      dst.metric[1].merge(cell.metric[1]);
    }
    view.raw.insert(view.raw.end(), shard.raw.begin(), shard.raw.end());
  }
  std::sort(view.raw.begin(), view.raw.end(),
            [](const RawSample& a, const RawSample& b) {
              return a.emission_time < b.emission_time;
            });
  return view;
}

Histogram build_histogram(const MetricsView& view, Metric which, double warmup_fraction,
                          double run_seconds) {
  if (run_seconds <= 0.0) run_seconds = static_cast<double>(view.last_second() + 1);
  // A bucket straddling the warmup boundary is still startup-contaminated;
  // exclude it whole.
  const auto cutoff = static_cast<std::int64_t>(std::ceil(warmup_fraction * run_seconds));
  Histogram h;
  bool first = true;
  double sum = 0.0, sum_sq = 0.0;
  DurationNs mn = 0, mx = 0;
  std::uint64_t n = 0;
  for (const auto& [sec, cell] : view.seconds) {
    if (sec < cutoff) continue;
    const MetricCell& m = cell.metric[static_cast<std::size_t>(which)];
    if (m.n == 0) continue;
    for (const auto& [b, c] : m.ms_hist) h.add(bucket_value(b), c);
    if (first || m.min < mn) mn = m.min;
    if (first || m.max > mx) mx = m.max;
    first = false;
    sum += m.sum;
    sum_sq += m.sum_sq;
    n += m.n;
  }
  // Bucket counts above are rebuilt from quantized cells; restore the exact
  // extrema and moments the cells carried.
  h.override_exact(n, mn, mx, sum, sum_sq);
  return h;
}

MetricsSummary summarize(const MetricsView& view, Metric which, double warmup_fraction,
                         double run_seconds) {
  return summarize(build_histogram(view, which, warmup_fraction, run_seconds));
}

namespace {

MetricSeriesPoint cell_point(std::int64_t second, const MetricCell& m) {
  MetricSeriesPoint p;
  p.second = second;
  p.n = m.n;
  if (m.n == 0) return p;
  p.avg = static_cast<DurationNs>(m.sum / static_cast<double>(m.n));
  p.min = m.min;
  p.max = m.max;
  // Nearest-rank quantiles over the sparse millisecond histogram.
  std::vector<std::pair<std::int32_t, std::uint64_t>> buckets(m.ms_hist.begin(), m.ms_hist.end());
  std::sort(buckets.begin(), buckets.end());
  const auto q = [&](double frac) -> DurationNs {
    const auto rank = static_cast<std::uint64_t>(std::ceil(frac * static_cast<double>(m.n)));
    const std::uint64_t target = rank == 0 ? 1 : rank;
    std::uint64_t cum = 0;
    for (const auto& [b, c] : buckets) {
      cum += c;
      if (cum >= target) return clampd(bucket_value(b), m.min, m.max);
    }
    return m.max;
  };
  p.p50 = q(0.50);
  p.p90 = q(0.90);
  p.p95 = q(0.95);
  p.p99 = q(0.99);
  return p;
}

}  // namespace

std::vector<MetricSeriesPoint> series(const MetricsView& view, Metric which) {
  std::vector<MetricSeriesPoint> out;
  out.reserve(view.seconds.size());
  for (const auto& [sec, cell] : view.seconds) {
    out.push_back(cell_point(sec, cell.metric[static_cast<std::size_t>(which)]));
  }
  return out;
}

DivergenceReport divergence_report(const MetricsView& view, double min_seconds) {
  const auto ev = series(view, Metric::event_latency);
  if (ev.empty() || static_cast<double>(ev.back().second - ev.front().second + 1) < min_seconds) {
    throw InsufficientData("divergence_report needs at least " + std::to_string(min_seconds) +
                           " seconds of series");
  }
  const auto pr = series(view, Metric::proc_latency);
  const auto slope = [](const std::vector<MetricSeriesPoint>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double n = 0;
    for (const auto& p : pts) {
      if (p.n == 0) continue;
      const double x = static_cast<double>(p.second);
      const double y = to_seconds(p.p50);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      n += 1;
    }
    if (n < 2) return 0.0;
    const double denom = n * sxx - sx * sx;
    return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
  };
  DivergenceReport r;
  r.event_slope = slope(ev);
  r.proc_slope = slope(pr);
  r.points = ev.size();
  return r;
}

std::string raw_samples_csv(const MetricsView& view) {
  std::string out = "emission_ns,event_latency_ns,proc_latency_ns\n";
  char line[96];
  for (const RawSample& s : view.raw) {
    std::snprintf(line, sizeof(line), "%lld,%lld,%lld\n",
                  static_cast<long long>(s.emission_time),
                  static_cast<long long>(s.event_latency),
                  static_cast<long long>(s.proc_latency));
    out += line;
  }
  return out;
}

std::string series_csv(const MetricsView& view) {
  std::string out = "second,metric,p50,p90,p95,p99,avg,min,max\n";
  char line[256];
  const auto row = [&](const char* name, const MetricSeriesPoint& p) {
    std::snprintf(line, sizeof(line), "%lld,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<long long>(p.second), name, to_seconds(p.p50), to_seconds(p.p90),
                  to_seconds(p.p95), to_seconds(p.p99), to_seconds(p.avg), to_seconds(p.min),
                  to_seconds(p.max));
    out += line;
  };
  for (const auto& [sec, cell] : view.seconds) {
    row("event", cell_point(sec, cell.metric[0]));
    row("proc", cell_point(sec, cell.metric[1]));
  }
  return out;
}

void MeteredSink::emit(const OutputRecord& rec) {
  if (closed_.load(std::memory_order_acquire)) {
    dropped_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  OutputRecord stamped = rec;
  stamped.emission_time = clock_();
  emitted_.fetch_add(1, std::memory_order_relaxed);
  if (metrics_ != nullptr) metrics_->record(stamped);
  if (tap_) {
    std::lock_guard<std::mutex> lk(tap_mu_);
    tap_(stamped);
  }
}

}  // namespace streamgauge
