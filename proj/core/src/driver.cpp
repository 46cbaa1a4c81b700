#include "streamgauge/driver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "streamgauge/remote.hpp"

namespace streamgauge {

const char* to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::ok: return "ok";
    case VerdictReason::queue_growth: return "queue_growth";
    case VerdictReason::depth_cap: return "depth_cap";
    case VerdictReason::connection_drop: return "connection_drop";
    case VerdictReason::generator_bound: return "generator_bound";
  }
  return "?";
}

namespace {

double depth_slope(const std::vector<QueueSample>& tail) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(tail.size());
  if (tail.size() < 2) return 0.0;
  for (const QueueSample& s : tail) {
    const double x = static_cast<double>(s.second);
    const double y = static_cast<double>(s.depth());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

Verdict evaluate(const SustainabilityPolicy& policy, double rate, double duration_seconds,
                 const QueueTelemetry& totals, bool dropped, bool hard_capped) {
  Verdict v;
  v.offered_rate = rate;
  const SustainabilityPolicy::Resolved resolved = policy.resolve(rate);
  v.q_max = resolved.q_max;
  v.slope_eps = resolved.slope_eps;

  const auto tail_start =
      static_cast<std::int64_t>(duration_seconds * (1.0 - policy.observation_fraction));
  const auto tail_end = static_cast<std::int64_t>(std::ceil(duration_seconds));
  std::vector<QueueSample> tail;
  for (const QueueSample& s : totals.samples) {
    if (s.second >= tail_start && s.second <= tail_end) tail.push_back(s);
  }
  v.evidence = tail;
  for (const QueueSample& s : tail) {
    v.max_tail_depth = std::max(v.max_tail_depth, s.depth());
  }
  v.depth_slope = depth_slope(tail);

  if (dropped) {
    v.reason = VerdictReason::connection_drop;
  } else if (hard_capped || v.max_tail_depth > v.q_max) {
    v.reason = VerdictReason::depth_cap;
  } else if (v.depth_slope > v.slope_eps) {
    v.reason = VerdictReason::queue_growth;
  } else {
    v.reason = VerdictReason::ok;
    v.sustainable = true;
  }
  return v;
}

}  // namespace

RunResult run_fixed(const RunOptions& options) {
  RunResult result;
  ClockFn clock = options.clock ? options.clock : wall_clock();
  const double peak = options.schedule.peak_rate();
  result.offered_peak_rate = peak;
  result.scheduled_duration = options.schedule.total_duration();
  const SustainabilityPolicy::Resolved resolved = options.policy.resolve(peak);

  const std::uint32_t n = options.generator.instances;
  std::vector<std::unique_ptr<DriverQueue>> queues;
  std::vector<DriverQueue*> queue_ptrs;
  for (std::uint32_t i = 0; i < n; ++i) {
    queues.push_back(std::make_unique<DriverQueue>(resolved.q_max, options.hard_queue_cap));
    queue_ptrs.push_back(queues.back().get());
  }

  const TimeNs t0 = clock();
  MetricsEngine metrics(t0, options.dump_raw_samples);
  MeteredSink sink(clock, &metrics, options.sink_tap);

  // SUT session: in-process reference engine or remote adapter.
  std::unique_ptr<ReferenceEngine> engine;
  std::unique_ptr<RemoteSession> session;
  if (options.sut.mode == SutMode::in_process) {
    EngineConfig ecfg = options.engine;
    if (!ecfg.clock) ecfg.clock = clock;
    if (options.ingest_tap && !ecfg.ingest_tap) ecfg.ingest_tap = options.ingest_tap;
    engine = std::make_unique<ReferenceEngine>(ecfg);
    std::vector<EventSource*> sources(queue_ptrs.begin(), queue_ptrs.end());
    engine->start(sources, sink);
  } else {
    session = std::make_unique<RemoteSession>(options.sut, queue_ptrs, sink,
                                              options.remote_linger);
    session->connect();  // throws on refusal or handshake mismatch
    session->start();
  }

  WorkloadGenerator generator(options.generator, options.schedule);
  generator.start(queue_ptrs, clock);

  // Per-second telemetry sampling on the orchestration thread.
  result.queue_telemetry.resize(n);
  bool dropped = false;
  bool hard_capped = false;
  bool aborted = false;
  const std::uint64_t abort_depth =
      options.policy.early_abort_factor > 0.0
          ? static_cast<std::uint64_t>(options.policy.early_abort_factor *
                                       static_cast<double>(resolved.q_max))
          : 0;
  std::int64_t second = 0;
  const DurationNs cutoff_grace = kNanosPerSecond;
  while (true) {
    ++second;
    sleep_until_ns(t0 + second * kNanosPerSecond);
    QueueSample total;
    total.second = second;
    bool all_done = true;
    for (std::uint32_t i = 0; i < n; ++i) {
      const QueueSample s = queues[i]->sample(second);
      result.queue_telemetry[i].samples.push_back(s);
      total.offered_total += s.offered_total;
      total.taken_total += s.taken_total;
      total.high_watermark = total.high_watermark || s.high_watermark;
      if (queues[i]->state() == QueueState::dropped) dropped = true;
      if (queues[i]->cap_exceeded()) hard_capped = true;
      if (queues[i]->state() == QueueState::open) all_done = false;
    }
    result.total_telemetry.samples.push_back(total);
    if (session && (session->state() == SessionState::connection_drop ||
                    session->state() == SessionState::protocol_error)) {
      dropped = true;
    }
    if (dropped || hard_capped) {
      aborted = true;
      break;
    }
    if (abort_depth > 0 && total.depth() > abort_depth) {
      hard_capped = true;
      aborted = true;
      break;
    }
    if (all_done) {
      if (!options.drain) break;
      bool drained = true;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (!queues[i]->exhausted()) drained = false;
      }
      if (drained) break;
    }
    if (!options.drain &&
        clock() - t0 > result.scheduled_duration + cutoff_grace) {
      break;
    }
  }

  generator.cancel();
  result.generation = generator.join();
  for (const GenerationReport& g : result.generation) {
    if (g.queue_closed && !dropped) {
      // Producer hit a refused offer without a recorded drop: hard cap path.
      hard_capped = true;
    }
  }

  if (engine) {
    if (!options.drain || aborted) engine->stop();
    result.engine_report = engine->join();
  }
  if (session) {
    if (!options.drain || aborted) session->stop();
    session->join();
    if (session->state() == SessionState::connection_drop ||
        session->state() == SessionState::protocol_error) {
      dropped = true;
    }
  }
  sink.close();

  const double duration_seconds = to_seconds(result.scheduled_duration);
  result.verdict = evaluate(options.policy, peak, duration_seconds, result.total_telemetry,
                            dropped, hard_capped);
  result.valid_metrics = result.verdict.reason != VerdictReason::connection_drop;
  if (result.valid_metrics) result.metrics = metrics.snapshot();
  return result;
}

Verdict ExperimentDriver::probe(double rate, DurationNs duration) {
  const double cal = calibrated_max();
  if (rate > cal) {
    Verdict v;
    v.sustainable = false;
    v.reason = VerdictReason::generator_bound;
    v.offered_rate = rate;
    return v;
  }
  const auto min_run = seconds_ns(base_.policy.min_run_seconds);
  RunOptions opts = base_;
  opts.schedule = RateSchedule::constant(rate, std::max(duration, min_run));
  opts.drain = false;
  return run_fixed(opts).verdict;
}

double ExperimentDriver::calibrated_max() {
  if (!calibrated_) calibrated_ = calibrate(base_.generator);
  return *calibrated_;
}

MstResult ExperimentDriver::find_mst(double lo, double hi, double rel_tol) {
  const double cal = calibrated_max();
  if (hi > cal) throw GeneratorBound(hi, cal);

  MstResult result;
  const DurationNs probe_duration = seconds_ns(base_.policy.min_run_seconds);
  const auto check_monotone = [&]() {
    double lowest_unsust = -1.0;
    for (const auto& [rate, verdict] : result.probes) {
      if (!verdict.sustainable &&
          (lowest_unsust < 0.0 || rate < lowest_unsust)) {
        lowest_unsust = rate;
      }
    }
    if (lowest_unsust < 0.0) return;
    for (const auto& [rate, verdict] : result.probes) {
      if (verdict.sustainable && rate > lowest_unsust) {
        throw NonMonotoneSut(rate, lowest_unsust);
      }
    }
  };

  const auto halting_probe = [&](double rate) {
    const Verdict verdict = probe(rate, probe_duration);
    result.probes.emplace_back(rate, verdict);
    if (verdict.reason == VerdictReason::connection_drop) throw SutConnectionLost(rate);
    return verdict;
  };

  Verdict v = halting_probe(hi);
  if (v.sustainable) {
    result.mst_rate = hi;
    result.ceiling_reached = true;
    return result;
  }

  double best = 0.0;
  if (lo > 0.0) {
    v = halting_probe(lo);
    if (!v.sustainable) throw NothingSustainable();
    best = lo;
  }

  const double floor = hi * 0.01;
  double lo_rate = lo;
  double hi_rate = hi;
  while ((hi_rate - lo_rate) / hi_rate > rel_tol) {
    if (hi_rate < floor) {
      if (best == 0.0) throw NothingSustainable();
      break;
    }
    const double mid = (lo_rate + hi_rate) / 2.0;
    v = halting_probe(mid);
    if (v.sustainable) {
      lo_rate = mid;
      best = mid;
    } else {
      hi_rate = mid;
    }
  }
  check_monotone();
  if (best == 0.0) throw NothingSustainable();
  result.mst_rate = best;
  return result;
}

SuiteReport run_suite(const SuiteOptions& options) {
  SuiteReport report;
  ExperimentDriver driver(options.base);
  report.mst = driver.find_mst(0.0, options.mst_hi, options.mst_rel_tol);
  const double mst = report.mst.mst_rate;

  const auto full_run = [&](const std::string& name, const RateSchedule& schedule,
                            bool skew) {
    RunOptions opts = options.base;
    opts.schedule = schedule;
    opts.drain = true;
    if (skew) {
      opts.generator.key_dist =
          KeyDistribution::make_single(opts.generator.key_dist.key_space / 2);
    }
    RunResult result = run_fixed(opts);
    if (result.verdict.reason == VerdictReason::connection_drop) {
      throw SutConnectionLost(result.offered_peak_rate);
    }
    report.runs.push_back(SuiteRun{name, std::move(result)});
  };

  full_run("mst", RateSchedule::constant(mst, options.run_duration), false);
  full_run("mst90", RateSchedule::constant(0.9 * mst, options.run_duration), false);
  if (options.fluctuating_run) {
    // Experiment-5 style three-step profile: high, one third, high again.
    RateSchedule fluct;
    const DurationNs seg = 10 * kNanosPerSecond;
    fluct.segments = {{seg, 0.9 * mst}, {seg, 0.3 * mst}, {seg, 0.9 * mst}};
    full_run("fluctuating", fluct, false);
  }
  if (options.skew_run) {
    full_run("skew", RateSchedule::constant(mst, options.run_duration), true);
  }
  return report;
}

}  // namespace streamgauge
