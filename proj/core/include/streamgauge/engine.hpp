#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "streamgauge/channel.hpp"
#include "streamgauge/event.hpp"
#include "streamgauge/metrics.hpp"
#include "streamgauge/queue.hpp"
#include "streamgauge/sut.hpp"
#include "streamgauge/window.hpp"

namespace streamgauge {

struct EngineConfig {
  QueryKind query = QueryKind::agg;
  WindowSpec window{};
  /// Aggregate ingest throttle across all sources (events/second). Gives the
  /// engine a controllable synthetic capacity for overload experiments.
  std::optional<double> service_rate_cap;
  /// Per-partition consumption throttle (events/second). Models per-slot
  /// compute so single-key skew binds on one partition.
  std::optional<double> partition_rate_cap;
  std::size_t buffer_size = 8192;  // inter-operator channel capacity, events
  std::size_t batch_size = 256;
  DurationNs mark_interval = kNanosPerMilli;
  ClockFn clock;  // engine-side clock; defaults to wall_clock()
  /// Test hook observing every event right after its ingest stamp.
  std::function<void(const Event&)> ingest_tap;
};

struct EngineReport {
  std::uint64_t events_processed = 0;
  std::uint64_t windows_closed = 0;     // window closes that held state
  std::uint64_t windows_discarded = 0;  // open state dropped at shutdown
  TimeNs final_watermark = kTimeUnset;  // min over sources of final mark
};

/// Per-window, per-key running aggregate for the SUM query.
struct WindowAccumulator {
  std::uint64_t sum_price = 0;
  std::uint64_t count = 0;
  TimeNs max_event_time = kTimeUnset;
  TimeNs max_ingest_time = kTimeUnset;
};

struct JoinKey {
  std::uint64_t user_id = 0;
  std::uint64_t gem_pack_id = 0;
  friend bool operator==(const JoinKey&, const JoinKey&) = default;
};

struct JoinKeyHash {
  std::size_t operator()(const JoinKey& k) const {
    return std::hash<std::uint64_t>()(k.user_id * 0x9e3779b97f4a7c15ULL ^ k.gem_pack_id);
  }
};

/// One partition's share of a join window: purchase tuples and ad match
/// counts per key, plus this partition's per-stream maxima. Join outputs are
/// stamped with window-wide per-stream maxima, so parts are merged by the
/// trigger worker before anything is emitted.
struct JoinWindowPart {
  std::unordered_map<JoinKey, std::vector<std::uint64_t>, JoinKeyHash> purchase_prices;
  std::unordered_map<JoinKey, std::uint64_t, JoinKeyHash> ad_counts;
  TimeNs purchases_max_event = kTimeUnset;
  TimeNs purchases_max_ingest = kTimeUnset;
  TimeNs ads_max_event = kTimeUnset;
  TimeNs ads_max_ingest = kTimeUnset;
  bool empty() const { return purchase_prices.empty() && ad_counts.empty(); }
};

/// Single-threaded windowing core owned by one partition worker. Routes each
/// event to every window containing it and maintains incremental state;
/// close_due() releases state for all windows ending at or before the mark.
class PartitionState {
 public:
  PartitionState(QueryKind query, WindowSpec spec) : query_(query), spec_(spec) {}

  void ingest(const Event& e);

  /// Closes every window with end <= up_to, ascending. Aggregation windows
  /// emit OutputRecords directly; join windows yield parts for merging.
  void close_due(TimeNs up_to, std::vector<OutputRecord>& agg_out,
                 std::vector<std::pair<WindowId, JoinWindowPart>>& join_out);

  /// Drops all remaining open state; returns how many windows were discarded.
  std::uint64_t discard_open();

  std::uint64_t windows_closed() const { return windows_closed_; }
  std::size_t open_windows() const {
    return query_ == QueryKind::agg ? agg_windows_.size() : join_windows_.size();
  }

 private:
  QueryKind query_;
  WindowSpec spec_;
  std::vector<WindowId> scratch_;
  std::map<TimeNs, std::unordered_map<std::uint64_t, WindowAccumulator>> agg_windows_;
  std::map<TimeNs, JoinWindowPart> join_windows_;
  TimeNs closed_up_to_ = kTimeUnset;  // DoubleClose guard
  std::uint64_t windows_closed_ = 0;
};

/// The built-in SUT: a small correct streaming engine running the two fixed
/// query templates with keyed sliding windows and bounded-buffer
/// backpressure. One worker per source partition; watermarks flow in-band
/// through the partition channels so closes never race in-flight events.
class ReferenceEngine {
 public:
  explicit ReferenceEngine(EngineConfig cfg);
  ~ReferenceEngine();

  ReferenceEngine(const ReferenceEngine&) = delete;
  ReferenceEngine& operator=(const ReferenceEngine&) = delete;

  void start(std::vector<EventSource*> sources, OutputSink& sink);
  /// Blocks until all queues are drained and every triggered window has been
  /// flushed, then reports.
  EngineReport join();
  /// Early cancellation: workers abandon whatever is still buffered.
  void stop();

  /// start + join.
  EngineReport run(std::vector<EventSource*> sources, OutputSink& sink) {
    start(std::move(sources), sink);
    return join();
  }

 private:
  struct Item {
    enum class Kind : std::uint8_t { event, mark, source_done } kind = Kind::event;
    std::uint16_t source_id = 0;
    TimeNs mark = kTimeUnset;
    Event ev{};
  };

  struct TriggerMsg {
    enum class Kind : std::uint8_t { parts, progress, partition_done } kind = Kind::progress;
    std::uint16_t partition_id = 0;
    TimeNs progress = kTimeUnset;
    std::vector<std::pair<WindowId, JoinWindowPart>> parts;
  };

  void source_loop(std::size_t idx);
  void partition_loop(std::size_t idx);
  void trigger_loop();
  std::size_t partition_of(const Event& e) const;
  TimeNs time_of(const Event& e) const {
    return spec().semantics == TimeSemantics::event_time ? e.event_time : e.ingest_time;
  }
  const WindowSpec& spec() const { return cfg_.window; }

  EngineConfig cfg_;
  std::vector<EventSource*> sources_;
  OutputSink* sink_ = nullptr;
  std::size_t n_ = 0;  // source count == partition count

  std::vector<std::unique_ptr<BoundedChannel<Item>>> partition_channels_;
  std::unique_ptr<BoundedChannel<TriggerMsg>> trigger_channel_;
  std::vector<std::thread> threads_;
  std::atomic<bool> cancel_{false};
  std::atomic<bool> started_{false};
  bool joined_ = false;

  std::atomic<std::uint64_t> events_processed_{0};
  std::atomic<std::uint64_t> windows_closed_{0};
  std::atomic<std::uint64_t> windows_discarded_{0};
  std::atomic<TimeNs> final_watermark_{kTimeUnset};
  std::mutex report_mu_;
};

}  // namespace streamgauge
