#include "streamgauge/generator.hpp"

#include <algorithm>
#include <cmath>

#include "streamgauge/rng.hpp"

namespace streamgauge {

namespace {

// Salts for per-instance derived seeds; each field draws from its own stream.
enum : std::uint64_t { kSaltStream = 1, kSaltUser = 2, kSaltGem = 3, kSaltPrice = 4 };

std::uint64_t sub_seed(std::uint64_t seed, std::uint32_t instance, std::uint64_t salt) {
  return mix64(seed, static_cast<std::uint64_t>(instance) * 8 + salt);
}

/// Sleep toward deadline in short chunks so cancellation is seen promptly.
bool cancellable_sleep(TimeNs deadline, const std::atomic<bool>* cancel, ClockFn& clock) {
  constexpr DurationNs kChunk = 5 * kNanosPerMilli;
  TimeNs now = clock();
  while (now < deadline) {
    if (cancel != nullptr && cancel->load(std::memory_order_acquire)) return false;
    sleep_until_ns(std::min(deadline, now + kChunk));
    now = clock();
  }
  return true;
}

}  // namespace

Event make_event(const GeneratorConfig& cfg, std::uint32_t instance, std::uint64_t seq) {
  Event e;
  e.seq = seq;
  const bool purchase =
      cfg.purchases_share >= 1.0 ||
      to_unit_double(mix64(sub_seed(cfg.seed, instance, kSaltStream), seq)) < cfg.purchases_share;
  e.stream = purchase ? StreamKind::purchases : StreamKind::ads;
  e.user_id = draw_key(seq, cfg.key_dist, sub_seed(cfg.seed, instance, kSaltUser));
  e.gem_pack_id = draw_key(seq, cfg.key_dist, sub_seed(cfg.seed, instance, kSaltGem));
  if (purchase) {
    const std::uint64_t span = cfg.price_max_cents - cfg.price_min_cents + 1;
    e.price_cents =
        cfg.price_min_cents + bounded(mix64(sub_seed(cfg.seed, instance, kSaltPrice), seq), span);
  }
  return e;
}

std::uint64_t instance_slice(std::uint64_t total, std::uint32_t instance,
                             std::uint32_t instances) {
  const auto n = static_cast<std::uint64_t>(instances);
  const auto i = static_cast<std::uint64_t>(instance);
  return total * (i + 1) / n - total * i / n;
}

GenerationReport generate_instance(const GeneratorConfig& cfg, std::uint32_t instance,
                                   const RateSchedule& schedule, DriverQueue& out,
                                   const std::atomic<bool>* cancel, ClockFn clock) {
  if (!clock) clock = wall_clock();
  GenerationReport report;

  const std::uint64_t event_cap =
      cfg.total_events > 0 ? instance_slice(cfg.total_events, instance, cfg.instances)
                           : UINT64_MAX;

  const TimeNs run_start = clock();
  TimeNs last_stamp = 0;
  std::uint64_t seq = 0;
  TimeNs logical_offset = 0;   // schedule time consumed so far (logical mode)
  TimeNs segment_anchor = run_start;  // absolute start of the current segment

  // Per-second pacing audit within the current segment.
  std::int64_t audit_second = -1;
  std::uint64_t audit_count = 0;
  double audit_expected = 0.0;
  const auto close_audit = [&]() {
    if (audit_second < 0 || audit_expected <= 0.0) return;
    const double err =
        std::abs(static_cast<double>(audit_count) - audit_expected) / audit_expected;
    report.max_pacing_error = std::max(report.max_pacing_error, err);
  };

  for (const RateSegment& seg : schedule.segments) {
    const auto seg_total = static_cast<std::uint64_t>(
        std::llround(to_seconds(seg.duration) * seg.rate));
    const std::uint64_t target = instance_slice(seg_total, instance, cfg.instances);
    const double inst_rate = seg.rate / static_cast<double>(cfg.instances);
    // Segments are anchored to their absolute scheduled start so boundary
    // drift never accumulates, and the bucket carries up to 100 ms of
    // catch-up credit so a scheduler stall is repaid instead of lost.
    const TimeNs seg_start = segment_anchor;
    TokenBucket bucket(inst_rate, std::max(inst_rate / 10.0, 4.0), seg_start);

    audit_second = -1;
    audit_count = 0;
    audit_expected = inst_rate;

    std::uint64_t emitted = 0;
    while (emitted < target && seq < event_cap) {
      if (cancel != nullptr && cancel->load(std::memory_order_acquire)) {
        report.wall_time = clock() - run_start;
        return report;
      }
      TimeNs now = clock();
      std::uint64_t burst = 0;
      const std::uint64_t want = std::min<std::uint64_t>(target - emitted, 1024);
      if (cfg.logical_time) {
        burst = want;
      } else {
        burst = bucket.grab(now, want);
        if (burst == 0) {
          // Wait for a millisecond's worth of tokens, not just one.
          const double chunk = std::max(inst_rate / 1000.0, 1.0);
          const TimeNs ready =
              bucket.next_ready_for(now, std::min(static_cast<double>(want), chunk));
          if (!cancellable_sleep(ready, cancel, clock)) {
            report.wall_time = clock() - run_start;
            return report;
          }
          continue;
        }
      }

      TimeNs stamp = std::max(now, last_stamp);
      if (!cfg.logical_time) {
        const std::int64_t second = (now - seg_start) / kNanosPerSecond;
        if (second != audit_second) {
          close_audit();
          audit_second = second;
          audit_count = 0;
        }
      }
      for (std::uint64_t i = 0; i < burst; ++i) {
        Event e = make_event(cfg, instance, seq);
        if (cfg.logical_time) {
          const TimeNs dt = static_cast<TimeNs>(
              static_cast<double>(emitted + 1) / static_cast<double>(target) *
              static_cast<double>(seg.duration));
          e.event_time = logical_offset + dt;
        } else {
          e.event_time = stamp;
        }
        last_stamp = e.event_time;
        if (!out.offer(e)) {
          report.queue_closed = true;
          report.wall_time = clock() - run_start;
          return report;
        }
        ++seq;
        ++emitted;
        ++report.events_emitted;
        ++audit_count;
      }
    }
    // The trailing partial second is not audited; only full seconds count.
    audit_second = -1;
    logical_offset += seg.duration;
    segment_anchor += seg.duration;
    if (seq >= event_cap) break;
  }
  report.wall_time = clock() - run_start;
  return report;
}

WorkloadGenerator::WorkloadGenerator(GeneratorConfig cfg, RateSchedule schedule)
    : cfg_(cfg), schedule_(std::move(schedule)) {
  if (schedule_.segments.empty()) {
    // Fall back to a config-rate schedule sized by total_events.
    const double aggregate = cfg_.rate_per_instance * cfg_.instances;
    const double secs = cfg_.total_events > 0
                            ? static_cast<double>(cfg_.total_events) / aggregate
                            : 10.0;
    schedule_ = RateSchedule::constant(aggregate, seconds_ns(secs));
  }
  reports_.resize(cfg_.instances);
}

WorkloadGenerator::~WorkloadGenerator() {
  cancel();
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void WorkloadGenerator::start(std::vector<DriverQueue*> queues, ClockFn clock) {
  for (std::uint32_t i = 0; i < cfg_.instances; ++i) {
    DriverQueue* q = queues[i];
    threads_.emplace_back([this, i, q, clock] {
      reports_[i] = generate_instance(cfg_, i, schedule_, *q, &cancel_, clock);
      q->close();
    });
  }
}

std::vector<GenerationReport> WorkloadGenerator::join() {
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
  return reports_;
}

double calibrate(const GeneratorConfig& cfg, DurationNs min_duration) {
  std::vector<std::thread> workers;
  std::vector<std::uint64_t> counts(cfg.instances, 0);
  const TimeNs start = now_ns();
  for (std::uint32_t i = 0; i < cfg.instances; ++i) {
    workers.emplace_back([&, i] {
      std::uint64_t seq = 0;
      std::uint64_t checksum = 0;
      while (true) {
        Event e = make_event(cfg, i, seq++);
        e.event_time = now_ns();
        checksum ^= e.user_id + e.gem_pack_id + static_cast<std::uint64_t>(e.event_time);
        if ((seq & 0x3ff) == 0 && e.event_time - start >= min_duration) break;
      }
      counts[i] = seq;
      volatile std::uint64_t sink = checksum;
      (void)sink;
    });
  }
  for (std::thread& t : workers) t.join();
  const DurationNs elapsed = now_ns() - start;
  std::uint64_t total = 0;
  for (const std::uint64_t c : counts) total += c;
  return static_cast<double>(total) / to_seconds(elapsed);
}

}  // namespace streamgauge
