#pragma once

// Independent brute-force oracles. Everything here recomputes expected
// results from first principles (scans, nested loops, sorting) and must stay
// independent of the implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "streamgauge/event.hpp"
#include "streamgauge/sut.hpp"
#include "streamgauge/window.hpp"

namespace streamgauge::testing {

/// All aligned windows containing t, found by scanning every aligned start
/// in [t - range, t].
inline std::vector<WindowId> scan_windows(TimeNs t, const WindowSpec& spec) {
  std::vector<WindowId> out;
  TimeNs start = align_down(t - spec.range, spec.slide);
  for (; start <= t; start += spec.slide) {
    if (start <= t && t < start + spec.range && start % spec.slide == 0) {
      out.push_back(WindowId{start, start + spec.range});
    }
  }
  return out;
}

struct AggExpectation {
  std::uint64_t sum = 0;
  std::uint64_t count = 0;
  TimeNs max_event_time = kTimeUnset;
  TimeNs max_ingest_time = kTimeUnset;
};

using AggKey = std::pair<TimeNs, std::uint64_t>;  // (window start, gem_pack_id)

/// Brute-force recomputation of the windowed SUM per (window, key) over a
/// recorded trace. Only windows with end <= final_mark are triggerable.
inline std::map<AggKey, AggExpectation> agg_oracle(const std::vector<Event>& trace,
                                                   const WindowSpec& spec, TimeNs final_mark) {
  std::map<AggKey, AggExpectation> expected;
  for (const Event& e : trace) {
    const TimeNs t =
        spec.semantics == TimeSemantics::event_time ? e.event_time : e.ingest_time;
    for (const WindowId& w : scan_windows(t, spec)) {
      if (final_mark != kTimeUnset && w.end > final_mark) continue;
      AggExpectation& exp = expected[{w.start, e.gem_pack_id}];
      exp.sum += e.price_cents;
      exp.count += 1;
      exp.max_event_time = std::max(exp.max_event_time, e.event_time);
      exp.max_ingest_time = std::max(exp.max_ingest_time, e.ingest_time);
    }
  }
  return expected;
}

struct JoinExpectation {
  // Multiset of (user, gem, price) outputs for one window.
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, std::uint64_t> outputs;
  TimeNs max_event_time = kTimeUnset;
  TimeNs max_ingest_time = kTimeUnset;
};

/// Nested-loop windowed join applying the two-step timestamp rule: tuples
/// inherit their stream's window-wide maxima, matches take the max of the
/// two streams.
inline std::map<TimeNs, JoinExpectation> join_oracle(const std::vector<Event>& trace,
                                                     const WindowSpec& spec, TimeNs final_mark) {
  std::map<TimeNs, std::pair<std::vector<Event>, std::vector<Event>>> windows;
  for (const Event& e : trace) {
    const TimeNs t =
        spec.semantics == TimeSemantics::event_time ? e.event_time : e.ingest_time;
    for (const WindowId& w : scan_windows(t, spec)) {
      if (final_mark != kTimeUnset && w.end > final_mark) continue;
      auto& [purchases, ads] = windows[w.start];
      (e.stream == StreamKind::purchases ? purchases : ads).push_back(e);
    }
  }
  std::map<TimeNs, JoinExpectation> expected;
  for (const auto& [start, streams] : windows) {
    const auto& [purchases, ads] = streams;
    if (purchases.empty() || ads.empty()) continue;
    JoinExpectation exp;
    TimeNs p_max_e = kTimeUnset, p_max_i = kTimeUnset;
    TimeNs a_max_e = kTimeUnset, a_max_i = kTimeUnset;
    for (const Event& p : purchases) {
      p_max_e = std::max(p_max_e, p.event_time);
      p_max_i = std::max(p_max_i, p.ingest_time);
    }
    for (const Event& a : ads) {
      a_max_e = std::max(a_max_e, a.event_time);
      a_max_i = std::max(a_max_i, a.ingest_time);
    }
    bool any = false;
    for (const Event& p : purchases) {
      for (const Event& a : ads) {
        if (p.user_id == a.user_id && p.gem_pack_id == a.gem_pack_id) {
          exp.outputs[{p.user_id, p.gem_pack_id, p.price_cents}] += 1;
          any = true;
        }
      }
    }
    if (!any) continue;
    exp.max_event_time = std::max(p_max_e, a_max_e);
    exp.max_ingest_time = std::max(p_max_i, a_max_i);
    expected[start] = std::move(exp);
  }
  return expected;
}

/// Sort-based exact nearest-rank quantile.
inline DurationNs sorted_quantile(std::vector<DurationNs> values, double q) {
  std::sort(values.begin(), values.end());
  if (values.empty()) return 0;
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

}  // namespace streamgauge::testing
