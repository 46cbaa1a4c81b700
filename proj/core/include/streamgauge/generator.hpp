#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "streamgauge/event.hpp"
#include "streamgauge/key_distribution.hpp"
#include "streamgauge/queue.hpp"
#include "streamgauge/rate.hpp"
#include "streamgauge/time.hpp"

namespace streamgauge {

struct GeneratorConfig {
  std::uint32_t instances = 2;
  double rate_per_instance = 10'000.0;  // used when no explicit schedule is given
  std::uint64_t total_events = 0;       // 0: bounded by the schedule alone
  std::uint64_t seed = 1;
  KeyDistribution key_dist = KeyDistribution::make_normal(10'000, 5'000.0, 1'000.0);
  std::uint64_t price_min_cents = 1;
  std::uint64_t price_max_cents = 9'999;
  double purchases_share = 1.0;  // remainder of the mix is ads
  /// Replay mode: stamp event_time with the scheduled emission deadline
  /// instead of the wall clock, making whole runs bit-reproducible.
  bool logical_time = false;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;

  bool valid() const {
    return instances > 0 && rate_per_instance > 0.0 && key_dist.valid() &&
           price_min_cents <= price_max_cents && purchases_share >= 0.0 &&
           purchases_share <= 1.0;
  }
};

struct GenerationReport {
  std::uint64_t events_emitted = 0;
  DurationNs wall_time = 0;
  double max_pacing_error = 0.0;  // worst relative per-second count deviation
  bool queue_closed = false;      // queue refused an offer; emission aborted
};

/// Event payload as a pure function of (config.seed, instance, seq). The
/// event_time stamp is the only non-deterministic field and is filled at
/// emission.
Event make_event(const GeneratorConfig& cfg, std::uint32_t instance, std::uint64_t seq);

/// Share of an aggregate count owed to one instance so slices always sum to
/// the exact total.
std::uint64_t instance_slice(std::uint64_t total, std::uint32_t instance, std::uint32_t instances);

/// Runs one generator instance against its queue: token-bucket pacing with
/// nanosecond deadlines, busy-wait only inside the final 100 us.
GenerationReport generate_instance(const GeneratorConfig& cfg, std::uint32_t instance,
                                   const RateSchedule& schedule, DriverQueue& out,
                                   const std::atomic<bool>* cancel = nullptr,
                                   ClockFn clock = {});

/// One independent worker per instance; instances share nothing but their
/// own output queue. Schedule rates are aggregate across instances.
class WorkloadGenerator {
 public:
  WorkloadGenerator(GeneratorConfig cfg, RateSchedule schedule);
  ~WorkloadGenerator();

  void start(std::vector<DriverQueue*> queues, ClockFn clock = {});
  std::vector<GenerationReport> join();
  /// Cancellation is observed within 10 ms.
  void cancel() { cancel_.store(true, std::memory_order_release); }

  const RateSchedule& schedule() const { return schedule_; }

 private:
  GeneratorConfig cfg_;
  RateSchedule schedule_;
  std::vector<std::thread> threads_;
  std::vector<GenerationReport> reports_;
  std::atomic<bool> cancel_{false};
};

/// Measures generator-only throughput into a null sink. Run before any
/// experiment: offered rates above this make the generator the bottleneck.
double calibrate(const GeneratorConfig& cfg, DurationNs min_duration = 5 * kNanosPerSecond);

}  // namespace streamgauge
