#include "streamgauge/queue.hpp"

#include <cstdio>

namespace streamgauge {

DriverQueue::DriverQueue(std::uint64_t capacity_soft, std::uint64_t capacity_hard)
    : capacity_soft_(capacity_soft), capacity_hard_(capacity_hard) {
  head_ = tail_ = new Chunk();
}

DriverQueue::~DriverQueue() {
  Chunk* c = head_;
  while (c != nullptr) {
    Chunk* next = c->next.load(std::memory_order_relaxed);
    delete c;
    c = next;
  }
}

std::uint64_t DriverQueue::depth() const {
  // Read taken first so a concurrent offer cannot make the difference wrap.
  const std::uint64_t t = taken_.load(std::memory_order_acquire);
  const std::uint64_t o = offered_.load(std::memory_order_acquire);
  return o >= t ? o - t : 0;
}

bool DriverQueue::offer(const Event& e) {
  if (state() != QueueState::open) return false;
  if (depth() >= capacity_hard_) {
    cap_exceeded_.store(true, std::memory_order_release);
    return false;
  }
  std::uint32_t slot = tail_->committed.load(std::memory_order_relaxed);
  if (slot == kChunkEvents) {
    auto* fresh = new Chunk();
    tail_->next.store(fresh, std::memory_order_release);
    tail_ = fresh;
    slot = 0;
  }
  tail_->items[slot] = e;
  tail_->committed.store(slot + 1, std::memory_order_release);
  offered_.fetch_add(1, std::memory_order_release);
  return true;
}

std::size_t DriverQueue::take_batch(Event* out, std::size_t max_n) {
  std::size_t got = 0;
  while (got < max_n) {
    const std::uint32_t committed = head_->committed.load(std::memory_order_acquire);
    if (consumed_ < committed) {
      const std::size_t n =
          std::min<std::size_t>(max_n - got, committed - consumed_);
      for (std::size_t i = 0; i < n; ++i) out[got + i] = head_->items[consumed_ + i];
      consumed_ += static_cast<std::uint32_t>(n);
      got += n;
      continue;
    }
    if (consumed_ == kChunkEvents) {
      Chunk* next = head_->next.load(std::memory_order_acquire);
      if (next == nullptr) break;  // producer is mid-link
      delete head_;
      head_ = next;
      consumed_ = 0;
      continue;
    }
    break;  // caught up with the producer
  }
  if (got > 0) taken_.fetch_add(got, std::memory_order_release);
  return got;
}

void DriverQueue::close() {
  QueueState expected = QueueState::open;
  state_.compare_exchange_strong(expected, QueueState::closed, std::memory_order_acq_rel);
}

void DriverQueue::mark_dropped() {
  state_.store(QueueState::dropped, std::memory_order_release);
}

QueueSample DriverQueue::sample(std::int64_t second) const {
  QueueSample s;
  s.second = second;
  s.taken_total = taken_.load(std::memory_order_acquire);
  s.offered_total = offered_.load(std::memory_order_acquire);
  if (s.offered_total < s.taken_total) s.offered_total = s.taken_total;
  s.high_watermark = s.depth() > capacity_soft_;
  return s;
}

std::string telemetry_csv(const QueueTelemetry& t) {
  std::string out = "second,depth,offer_rate,take_rate\n";
  char line[128];
  std::uint64_t prev_offered = 0;
  std::uint64_t prev_taken = 0;
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const QueueSample& s = t.samples[i];
    const std::uint64_t offer_rate = s.offered_total - prev_offered;
    const std::uint64_t take_rate = s.taken_total - prev_taken;
    std::snprintf(line, sizeof(line), "%lld,%llu,%llu,%llu\n",
                  static_cast<long long>(s.second),
                  static_cast<unsigned long long>(s.depth()),
                  static_cast<unsigned long long>(offer_rate),
                  static_cast<unsigned long long>(take_rate));
    out += line;
    prev_offered = s.offered_total;
    prev_taken = s.taken_total;
  }
  return out;
}

}  // namespace streamgauge
