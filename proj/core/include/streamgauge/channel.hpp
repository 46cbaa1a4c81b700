#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <algorithm>
#include <deque>
#include <mutex>
#include <vector>

#include "streamgauge/time.hpp"

namespace streamgauge {

/// Bounded blocking buffer between operators. push() blocks while full; that
/// is the engine's backpressure path (slow downstream stalls ingest, which
/// stalls queue takes, which grows the driver queue).
template <typename T>
class BoundedChannel {
 public:
  explicit BoundedChannel(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  /// Returns false once the channel is closed.
  bool push(T item) {
    std::unique_lock<std::mutex> lk(mu_);
    not_full_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    lk.unlock();
    not_empty_.notify_one();
    return true;
  }

  /// Moves the whole range in, waiting for space as needed. One lock per
  /// admitted chunk instead of one per item.
  bool push_batch(T* items, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      std::unique_lock<std::mutex> lk(mu_);
      not_full_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
      if (closed_) return false;
      const std::size_t room = capacity_ - items_.size();
      const std::size_t take = std::min(room, n - done);
      for (std::size_t i = 0; i < take; ++i) items_.push_back(std::move(items[done + i]));
      done += take;
      lk.unlock();
      not_empty_.notify_one();
    }
    return true;
  }

  /// Pops up to max_n items, waiting up to timeout for the first one.
  /// Returns 0 on timeout or when closed and drained.
  std::size_t pop_batch(std::vector<T>& out, std::size_t max_n, DurationNs timeout) {
    std::unique_lock<std::mutex> lk(mu_);
    if (items_.empty() && !closed_) {
      not_empty_.wait_for(lk, std::chrono::nanoseconds(timeout),
                          [&] { return !items_.empty() || closed_; });
    }
    std::size_t n = 0;
    while (n < max_n && !items_.empty()) {
      out.push_back(std::move(items_.front()));
      items_.pop_front();
      ++n;
    }
    if (n > 0) {
      lk.unlock();
      not_full_.notify_all();
    }
    return n;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed_and_empty() {
    std::lock_guard<std::mutex> lk(mu_);
    return closed_ && items_.empty();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

}  // namespace streamgauge
