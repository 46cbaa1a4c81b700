#include "streamgauge/engine.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

#include "streamgauge/rate.hpp"

namespace streamgauge {

namespace {

constexpr DurationNs kIdleBackoff = 200 * kNanosPerMicro;
constexpr DurationNs kPopTimeout = kNanosPerMilli;

TimeNs max_ts(TimeNs a, TimeNs b) {
  if (a == kTimeUnset) return b;
  if (b == kTimeUnset) return a;
  return a > b ? a : b;
}

/// Sleep toward deadline in short chunks so cancellation stays prompt.
void interruptible_sleep(TimeNs deadline, const std::atomic<bool>& cancel, const ClockFn& clock) {
  constexpr DurationNs kChunk = 10 * kNanosPerMilli;
  TimeNs now = clock();
  while (now < deadline && !cancel.load(std::memory_order_acquire)) {
    sleep_until_ns(std::min(deadline, now + kChunk));
    now = clock();
  }
}

}  // namespace

void PartitionState::ingest(const Event& e) {
  const TimeNs t = spec_.semantics == TimeSemantics::event_time ? e.event_time : e.ingest_time;
  assert(closed_up_to_ == kTimeUnset || t >= closed_up_to_);
  assign_windows(t, spec_, scratch_);
  if (query_ == QueryKind::agg) {
    for (const WindowId& w : scratch_) {
      WindowAccumulator& acc = agg_windows_[w.start][e.gem_pack_id];
      acc.sum_price += e.price_cents;
      acc.count += 1;
      acc.max_event_time = max_ts(acc.max_event_time, e.event_time);
      acc.max_ingest_time = max_ts(acc.max_ingest_time, e.ingest_time);
    }
    return;
  }
  const JoinKey key{e.user_id, e.gem_pack_id};
  for (const WindowId& w : scratch_) {
    JoinWindowPart& part = join_windows_[w.start];
    if (e.stream == StreamKind::purchases) {
      part.purchase_prices[key].push_back(e.price_cents);
      part.purchases_max_event = max_ts(part.purchases_max_event, e.event_time);
      part.purchases_max_ingest = max_ts(part.purchases_max_ingest, e.ingest_time);
    } else {
      part.ad_counts[key] += 1;
      part.ads_max_event = max_ts(part.ads_max_event, e.event_time);
      part.ads_max_ingest = max_ts(part.ads_max_ingest, e.ingest_time);
    }
  }
}

void PartitionState::close_due(TimeNs up_to,
                               std::vector<OutputRecord>& agg_out,
                               std::vector<std::pair<WindowId, JoinWindowPart>>& join_out) {
  // Closing below the high-water mark would re-close released windows.
  if (closed_up_to_ != kTimeUnset && up_to < closed_up_to_) {
    throw std::logic_error("window close mark went backwards");
  }
  closed_up_to_ = max_ts(closed_up_to_, up_to);
  if (query_ == QueryKind::agg) {
    while (!agg_windows_.empty()) {
      auto it = agg_windows_.begin();
      const TimeNs start = it->first;
      if (start + spec_.range > up_to) break;
      for (const auto& [key, acc] : it->second) {
        OutputRecord rec;
        rec.query = QueryKind::agg;
        rec.gem_pack_id = key;
        rec.sum_price_cents = acc.sum_price;
        rec.window_start = start;
        rec.contributors = acc.count;
        rec.max_event_time = acc.max_event_time;
        rec.max_ingest_time = acc.max_ingest_time;
        agg_out.push_back(rec);
      }
      agg_windows_.erase(it);
      ++windows_closed_;
    }
    return;
  }
  while (!join_windows_.empty()) {
    auto it = join_windows_.begin();
    const TimeNs start = it->first;
    if (start + spec_.range > up_to) break;
    join_out.emplace_back(WindowId{start, start + spec_.range}, std::move(it->second));
    join_windows_.erase(it);
    ++windows_closed_;
  }
}

std::uint64_t PartitionState::discard_open() {
  const auto n = static_cast<std::uint64_t>(open_windows());
  agg_windows_.clear();
  join_windows_.clear();
  return n;
}

ReferenceEngine::ReferenceEngine(EngineConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.clock) cfg_.clock = wall_clock();
}

ReferenceEngine::~ReferenceEngine() {
  stop();
  if (started_.load() && !joined_) join();
}

std::size_t ReferenceEngine::partition_of(const Event& e) const {
  if (cfg_.query == QueryKind::agg) {
    return static_cast<std::size_t>(e.gem_pack_id * 0x9e3779b97f4a7c15ULL >> 32) % n_;
  }
  return JoinKeyHash{}(JoinKey{e.user_id, e.gem_pack_id}) % n_;
}

void ReferenceEngine::start(std::vector<EventSource*> sources, OutputSink& sink) {
  sources_ = std::move(sources);
  sink_ = &sink;
  n_ = sources_.size();
  partition_channels_.clear();
  for (std::size_t i = 0; i < n_; ++i) {
    partition_channels_.push_back(std::make_unique<BoundedChannel<Item>>(cfg_.buffer_size));
  }
  trigger_channel_ = std::make_unique<BoundedChannel<TriggerMsg>>(1024);
  started_.store(true);
  for (std::size_t i = 0; i < n_; ++i) {
    threads_.emplace_back([this, i] { partition_loop(i); });
  }
  if (cfg_.query == QueryKind::join) {
    threads_.emplace_back([this] { trigger_loop(); });
  }
  for (std::size_t i = 0; i < n_; ++i) {
    threads_.emplace_back([this, i] { source_loop(i); });
  }
}

void ReferenceEngine::source_loop(std::size_t idx) {
  EventSource* src = sources_[idx];
  const bool event_time = spec().semantics == TimeSemantics::event_time;
  std::optional<TokenBucket> throttle;
  if (cfg_.service_rate_cap) {
    const double per_source = *cfg_.service_rate_cap / static_cast<double>(n_);
    // Burst above the largest single wait so wakeup overshoot is banked.
    const double burst =
        std::max(4.0 * per_source / 1000.0, 2.0 * static_cast<double>(cfg_.batch_size));
    throttle.emplace(per_source, burst, cfg_.clock());
  }

  std::vector<Event> buf(cfg_.batch_size);
  std::vector<std::vector<Item>> route(n_);
  TimeNs last_stamp = 0;
  TimeNs max_event_seen = kTimeUnset;
  TimeNs last_mark = kTimeUnset;

  const auto push_mark = [&](TimeNs value, Item::Kind kind) {
    for (auto& ch : partition_channels_) {
      Item item;
      item.kind = kind;
      item.source_id = static_cast<std::uint16_t>(idx);
      item.mark = value;
      if (!ch->push(std::move(item))) return false;
    }
    return true;
  };

  while (!cancel_.load(std::memory_order_acquire)) {
    const std::size_t got = src->take_batch(buf.data(), cfg_.batch_size);
    if (got > 0 && throttle) {
      // Pace consumption: wait until the bucket covers everything just taken.
      std::size_t granted = 0;
      while (granted < got && !cancel_.load(std::memory_order_acquire)) {
        granted += throttle->grab(cfg_.clock(), got - granted);
        if (granted < got) {
          interruptible_sleep(
              throttle->next_ready_for(cfg_.clock(), static_cast<double>(got - granted)),
              cancel_, cfg_.clock);
        }
      }
    }
    if (got > 0) {
      TimeNs stamp = cfg_.clock();
      if (stamp < last_stamp) stamp = last_stamp;
      last_stamp = stamp;
      for (std::size_t i = 0; i < got; ++i) {
        Event& e = buf[i];
        e.ingest_time = stamp;
        if (cfg_.ingest_tap) cfg_.ingest_tap(e);
        max_event_seen = max_ts(max_event_seen, e.event_time);
      }
      // Stable-group the batch by partition, then one push per partition.
      // Order within each (source, partition) pair is preserved, which is
      // all the in-band watermark invariant needs.
      for (auto& r : route) r.clear();
      for (std::size_t i = 0; i < got; ++i) {
        Item item;
        item.kind = Item::Kind::event;
        item.source_id = static_cast<std::uint16_t>(idx);
        item.ev = buf[i];
        route[partition_of(buf[i])].push_back(std::move(item));
      }
      for (std::size_t p = 0; p < n_; ++p) {
        if (route[p].empty()) continue;
        if (!partition_channels_[p]->push_batch(route[p].data(), route[p].size())) return;
      }
      events_processed_.fetch_add(got, std::memory_order_relaxed);
    }
    const TimeNs mark = event_time ? max_event_seen : cfg_.clock();
    if (mark != kTimeUnset &&
        (last_mark == kTimeUnset || mark >= last_mark + cfg_.mark_interval)) {
      if (!push_mark(mark, Item::Kind::mark)) return;
      last_mark = mark;
    }
    if (got == 0) {
      if (src->exhausted()) break;
      sleep_until_ns(cfg_.clock() + kIdleBackoff);
    }
  }
  const TimeNs final_mark = event_time ? max_event_seen : cfg_.clock();
  push_mark(final_mark, Item::Kind::source_done);
}

void ReferenceEngine::partition_loop(std::size_t idx) {
  PartitionState state(cfg_.query, spec());
  BoundedChannel<Item>& ch = *partition_channels_[idx];
  std::vector<TimeNs> marks(n_, kTimeUnset);
  std::vector<bool> done(n_, false);
  std::size_t done_count = 0;
  TimeNs watermark = kTimeUnset;

  std::optional<TokenBucket> throttle;
  if (cfg_.partition_rate_cap) {
    throttle.emplace(*cfg_.partition_rate_cap,
                     std::max(4.0 * *cfg_.partition_rate_cap / 1000.0,
                              2.0 * static_cast<double>(cfg_.batch_size)),
                     cfg_.clock());
  }

  std::vector<Item> batch;
  std::vector<OutputRecord> agg_out;
  std::vector<std::pair<WindowId, JoinWindowPart>> join_out;

  const auto advance = [&]() -> bool {
    TimeNs w = kTimeUnset;
    for (std::size_t s = 0; s < n_; ++s) {
      if (marks[s] == kTimeUnset) return true;  // watermark undefined yet
      w = (w == kTimeUnset || marks[s] < w) ? marks[s] : w;
    }
    if (watermark != kTimeUnset && w <= watermark) return true;
    watermark = w;
    agg_out.clear();
    join_out.clear();
    state.close_due(watermark, agg_out, join_out);
    for (const OutputRecord& rec : agg_out) sink_->emit(rec);
    if (cfg_.query == QueryKind::join) {
      TriggerMsg msg;
      msg.kind = TriggerMsg::Kind::parts;
      msg.partition_id = static_cast<std::uint16_t>(idx);
      msg.progress = watermark;
      msg.parts = std::move(join_out);
      join_out.clear();
      if (!trigger_channel_->push(std::move(msg))) return false;
    }
    return true;
  };

  while (!cancel_.load(std::memory_order_acquire)) {
    batch.clear();
    const std::size_t got = ch.pop_batch(batch, cfg_.batch_size, kPopTimeout);
    if (got == 0) {
      if (done_count == n_ || ch.closed_and_empty()) break;
      continue;
    }
    if (throttle) {
      std::size_t events_in_batch = 0;
      for (const Item& item : batch) {
        if (item.kind == Item::Kind::event) ++events_in_batch;
      }
      std::size_t granted = 0;
      while (granted < events_in_batch && !cancel_.load(std::memory_order_acquire)) {
        granted += throttle->grab(cfg_.clock(), events_in_batch - granted);
        if (granted < events_in_batch) {
          interruptible_sleep(throttle->next_ready_for(
                                  cfg_.clock(),
                                  static_cast<double>(events_in_batch - granted)),
                              cancel_, cfg_.clock);
        }
      }
    }
    for (Item& item : batch) {
      switch (item.kind) {
        case Item::Kind::event:
          state.ingest(item.ev);
          break;
        case Item::Kind::mark:
          marks[item.source_id] = max_ts(marks[item.source_id], item.mark);
          break;
        case Item::Kind::source_done:
          marks[item.source_id] = max_ts(marks[item.source_id], item.mark);
          if (!done[item.source_id]) {
            done[item.source_id] = true;
            ++done_count;
          }
          break;
      }
    }
    if (!advance()) return;
    if (done_count == n_) break;
  }

  if (!cancel_.load(std::memory_order_acquire) && done_count == n_) {
    advance();
    windows_discarded_.fetch_add(state.discard_open(), std::memory_order_relaxed);
  }
  windows_closed_.fetch_add(cfg_.query == QueryKind::agg ? state.windows_closed() : 0,
                            std::memory_order_relaxed);
  {
    std::lock_guard<std::mutex> lk(report_mu_);
    const TimeNs current = final_watermark_.load(std::memory_order_relaxed);
    if (watermark != kTimeUnset && (current == kTimeUnset || watermark < current)) {
      final_watermark_.store(watermark, std::memory_order_relaxed);
    }
  }
  if (cfg_.query == QueryKind::join) {
    TriggerMsg msg;
    msg.kind = TriggerMsg::Kind::partition_done;
    msg.partition_id = static_cast<std::uint16_t>(idx);
    msg.progress = watermark;
    trigger_channel_->push(std::move(msg));
  }
}

void ReferenceEngine::trigger_loop() {
  struct Pending {
    WindowId window;
    TimeNs purchases_max_event = kTimeUnset;
    TimeNs purchases_max_ingest = kTimeUnset;
    TimeNs ads_max_event = kTimeUnset;
    TimeNs ads_max_ingest = kTimeUnset;
    std::vector<JoinWindowPart> parts;
  };
  std::map<TimeNs, Pending> pending;
  std::vector<TimeNs> progress(n_, kTimeUnset);
  std::vector<bool> done(n_, false);
  std::size_t done_count = 0;
  std::vector<TriggerMsg> batch;

  const auto emit_due = [&](TimeNs up_to) {
    while (!pending.empty()) {
      auto it = pending.begin();
      Pending& p = it->second;
      if (up_to == kTimeUnset || p.window.end > up_to) break;
      // Two-step stamping: every tuple inherits its stream's window-wide
      // maximum, then each match takes the max over the two streams.
      const TimeNs out_event = max_ts(p.purchases_max_event, p.ads_max_event);
      const TimeNs out_ingest = max_ts(p.purchases_max_ingest, p.ads_max_ingest);
      bool any = false;
      for (const JoinWindowPart& part : p.parts) {
        for (const auto& [key, prices] : part.purchase_prices) {
          const auto ads_it = part.ad_counts.find(key);
          if (ads_it == part.ad_counts.end()) continue;
          for (const std::uint64_t price : prices) {
            for (std::uint64_t i = 0; i < ads_it->second; ++i) {
              OutputRecord rec;
              rec.query = QueryKind::join;
              rec.user_id = key.user_id;
              rec.gem_pack_id = key.gem_pack_id;
              rec.price_cents = price;
              rec.max_event_time = out_event;
              rec.max_ingest_time = out_ingest;
              sink_->emit(rec);
              any = true;
            }
          }
        }
      }
      (void)any;
      windows_closed_.fetch_add(1, std::memory_order_relaxed);
      pending.erase(it);
    }
  };

  while (!cancel_.load(std::memory_order_acquire)) {
    batch.clear();
    const std::size_t got = trigger_channel_->pop_batch(batch, 64, kPopTimeout);
    if (got == 0) {
      if (done_count == n_ || trigger_channel_->closed_and_empty()) break;
      continue;
    }
    for (TriggerMsg& msg : batch) {
      progress[msg.partition_id] = max_ts(progress[msg.partition_id], msg.progress);
      if (msg.kind == TriggerMsg::Kind::partition_done) {
        if (!done[msg.partition_id]) {
          done[msg.partition_id] = true;
          ++done_count;
        }
        continue;
      }
      for (auto& [window, part] : msg.parts) {
        Pending& p = pending[window.start];
        p.window = window;
        p.purchases_max_event = max_ts(p.purchases_max_event, part.purchases_max_event);
        p.purchases_max_ingest = max_ts(p.purchases_max_ingest, part.purchases_max_ingest);
        p.ads_max_event = max_ts(p.ads_max_event, part.ads_max_event);
        p.ads_max_ingest = max_ts(p.ads_max_ingest, part.ads_max_ingest);
        p.parts.push_back(std::move(part));
      }
    }
    TimeNs min_progress = kTimeUnset;
    bool all = true;
    for (std::size_t i = 0; i < n_; ++i) {
      if (progress[i] == kTimeUnset) {
        all = false;
        break;
      }
      min_progress =
          (min_progress == kTimeUnset || progress[i] < min_progress) ? progress[i] : min_progress;
    }
    if (all) emit_due(min_progress);
    if (done_count == n_) break;
  }
  windows_discarded_.fetch_add(pending.size(), std::memory_order_relaxed);
}

EngineReport ReferenceEngine::join() {
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
  joined_ = true;
  EngineReport report;
  report.events_processed = events_processed_.load();
  report.windows_closed = windows_closed_.load();
  report.windows_discarded = windows_discarded_.load();
  report.final_watermark = final_watermark_.load();
  return report;
}

void ReferenceEngine::stop() {
  cancel_.store(true, std::memory_order_release);
  for (auto& ch : partition_channels_) {
    if (ch) ch->close();
  }
  if (trigger_channel_) trigger_channel_->close();
}

}  // namespace streamgauge
