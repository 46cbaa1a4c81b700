#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "streamgauge/event.hpp"
#include "streamgauge/time.hpp"

namespace streamgauge {

enum class QueueState : std::uint8_t {
  open = 0,
  closed = 1,   // producer finished; drain and stop
  dropped = 2,  // consumer side lost (SUT disconnect); terminal failure
};

/// Pull contract shared by the driver queue and remote source adapters.
class EventSource {
 public:
  virtual ~EventSource() = default;
  /// Moves up to max_n events into out, FIFO. Returns 0 when nothing is
  /// available right now; never blocks.
  virtual std::size_t take_batch(Event* out, std::size_t max_n) = 0;
  /// True once no further events will ever arrive.
  virtual bool exhausted() const = 0;
};

/// One telemetry row, sampled once per second by the driver. Depth is
/// derived from the two counters so conservation holds by construction.
struct QueueSample {
  std::int64_t second = 0;  // seconds since run start
  std::uint64_t offered_total = 0;
  std::uint64_t taken_total = 0;
  bool high_watermark = false;

  std::uint64_t depth() const { return offered_total - taken_total; }
};

struct QueueTelemetry {
  std::vector<QueueSample> samples;
};

/// The metered in-memory queue between one generator instance and one SUT
/// source. Single producer, single consumer; a third observer thread may
/// read the counters. The queue is soft-bounded: offers never block, because
/// queue growth itself is the sustainability signal. A hard cap exists only
/// to protect the host; hitting it fails the run.
class DriverQueue final : public EventSource {
 public:
  explicit DriverQueue(std::uint64_t capacity_soft = 1'000'000,
                       std::uint64_t capacity_hard = 100'000'000);
  ~DriverQueue() override;

  DriverQueue(const DriverQueue&) = delete;
  DriverQueue& operator=(const DriverQueue&) = delete;

  /// Producer side. Returns false when the queue is closed/dropped or the
  /// hard cap was hit (see cap_exceeded()); the producer must then stop.
  bool offer(const Event& e);

  /// Consumer side.
  std::size_t take_batch(Event* out, std::size_t max_n) override;
  bool exhausted() const override {
    return state() != QueueState::open && depth() == 0;
  }

  /// Producer signals end of generation; consumer may drain whatever is left.
  void close();
  /// Consumer/session signals the SUT connection is gone.
  void mark_dropped();

  QueueState state() const { return state_.load(std::memory_order_acquire); }
  std::uint64_t offered_total() const { return offered_.load(std::memory_order_acquire); }
  std::uint64_t taken_total() const { return taken_.load(std::memory_order_acquire); }
  std::uint64_t depth() const;
  std::uint64_t capacity_soft() const { return capacity_soft_; }
  bool cap_exceeded() const { return cap_exceeded_.load(std::memory_order_acquire); }

  QueueSample sample(std::int64_t second) const;

 private:
  static constexpr std::size_t kChunkEvents = 4096;

  struct Chunk {
    std::array<Event, kChunkEvents> items;
    std::atomic<std::uint32_t> committed{0};
    std::atomic<Chunk*> next{nullptr};
  };

  std::uint64_t capacity_soft_;
  std::uint64_t capacity_hard_;

  // Producer-owned.
  Chunk* tail_;
  // Consumer-owned.
  Chunk* head_;
  std::uint32_t consumed_ = 0;

  std::atomic<std::uint64_t> offered_{0};
  std::atomic<std::uint64_t> taken_{0};
  std::atomic<QueueState> state_{QueueState::open};
  std::atomic<bool> cap_exceeded_{false};
};

/// Serializes telemetry as `second,depth,offer_rate,take_rate` rows.
std::string telemetry_csv(const QueueTelemetry& t);

}  // namespace streamgauge
