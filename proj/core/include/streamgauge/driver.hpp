#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamgauge/engine.hpp"
#include "streamgauge/generator.hpp"
#include "streamgauge/metrics.hpp"
#include "streamgauge/queue.hpp"
#include "streamgauge/rate.hpp"
#include "streamgauge/sut.hpp"

namespace streamgauge {

/// Sustainability thresholds. Defaults are expressed relative to the probed
/// rate so one policy serves every scale; absolute overrides win when set.
struct SustainabilityPolicy {
  double depth_cap_seconds = 5.0;        // Q_max = rate * this
  double slope_epsilon_fraction = 0.01;  // eps = rate * this (events/s)
  double observation_fraction = 0.5;     // tail of the run used for the fit
  double min_run_seconds = 30.0;
  std::uint64_t max_queue_depth = 0;   // absolute Q_max override, events
  double growth_slope_epsilon = 0.0;   // absolute eps override, events/s
  double early_abort_factor = 1.5;     // abort probe at factor * Q_max; 0 = off

  friend bool operator==(const SustainabilityPolicy&, const SustainabilityPolicy&) = default;

  struct Resolved {
    std::uint64_t q_max = 0;
    double slope_eps = 0.0;
  };
  Resolved resolve(double rate) const {
    Resolved r;
    r.q_max = max_queue_depth > 0 ? max_queue_depth
                                  : static_cast<std::uint64_t>(depth_cap_seconds * rate);
    r.slope_eps = growth_slope_epsilon > 0.0 ? growth_slope_epsilon
                                             : slope_epsilon_fraction * rate;
    return r;
  }
};

enum class VerdictReason : std::uint8_t {
  ok = 0,
  queue_growth,
  depth_cap,
  connection_drop,
  generator_bound,
};

const char* to_string(VerdictReason r);

struct Verdict {
  bool sustainable = false;
  VerdictReason reason = VerdictReason::ok;
  double offered_rate = 0.0;
  double depth_slope = 0.0;           // events/second over the tail window
  std::uint64_t max_tail_depth = 0;   // peak total depth over the tail
  std::uint64_t q_max = 0;            // resolved threshold used
  double slope_eps = 0.0;
  std::vector<QueueSample> evidence;  // aggregated tail samples
};

struct NothingSustainable : std::runtime_error {
  NothingSustainable() : std::runtime_error("no probed rate was sustainable") {}
};

struct NonMonotoneSut : std::runtime_error {
  NonMonotoneSut(double sust_rate, double unsust_rate)
      : std::runtime_error("non-monotone verdicts: sustainable at " +
                           std::to_string(sust_rate) + " but unsustainable at lower rate " +
                           std::to_string(unsust_rate)) {}
};

struct GeneratorBound : std::runtime_error {
  GeneratorBound(double wanted, double calibrated)
      : std::runtime_error("requested rate " + std::to_string(wanted) +
                           " events/s exceeds calibrated generator maximum " +
                           std::to_string(calibrated)) {}
};

/// The SUT dropped a queue connection mid-experiment. The whole experiment
/// halts; no latency numbers are reported for the halted run.
struct SutConnectionLost : std::runtime_error {
  explicit SutConnectionLost(double rate)
      : std::runtime_error("SUT dropped a data generator queue connection at " +
                           std::to_string(rate) + " events/s; experiment halted") {}
};

struct RunOptions {
  GeneratorConfig generator;
  RateSchedule schedule;
  SutDescriptor sut;
  EngineConfig engine;  // in-process SUT parameters
  SustainabilityPolicy policy;
  double warmup_fraction = 0.25;
  /// drain: wait for EOS and flush all triggered windows. Otherwise the SUT
  /// is cut off right after the schedule ends (overload runs).
  bool drain = true;
  bool dump_raw_samples = false;
  std::uint64_t hard_queue_cap = 100'000'000;
  ClockFn clock;
  std::function<void(const OutputRecord&)> sink_tap;
  std::function<void(const Event&)> ingest_tap;
  DurationNs remote_linger = 30 * kNanosPerSecond;
};

struct RunResult {
  Verdict verdict;
  MetricsView metrics;
  bool valid_metrics = true;  // false when the run was halted; no latency report
  std::vector<QueueTelemetry> queue_telemetry;
  QueueTelemetry total_telemetry;
  std::vector<GenerationReport> generation;
  EngineReport engine_report;
  double offered_peak_rate = 0.0;
  DurationNs scheduled_duration = 0;
};

/// Executes one run end to end: queues, generator, SUT session, per-second
/// telemetry sampling, verdict evaluation.
RunResult run_fixed(const RunOptions& options);

struct MstResult {
  double mst_rate = 0.0;
  bool ceiling_reached = false;  // hi itself was sustainable
  std::vector<std::pair<double, Verdict>> probes;
};

/// Orchestrates probes and the sustainable-throughput search against one
/// SUT configuration.
class ExperimentDriver {
 public:
  explicit ExperimentDriver(RunOptions base) : base_(std::move(base)) {}

  /// One constant-rate probe. Duration is clamped up to policy.min_run.
  Verdict probe(double rate, DurationNs duration);

  /// Binary search for the maximum sustainable throughput over (lo, hi].
  /// Each probe runs policy.min_run seconds.
  MstResult find_mst(double lo, double hi, double rel_tol = 0.05);

  /// Generator-only calibration, cached across probes.
  double calibrated_max();
  /// Skips the calibration run when the generator ceiling is already known.
  void set_calibrated_max(double rate) { calibrated_ = rate; }

  const RunOptions& base() const { return base_; }
  RunOptions& base() { return base_; }

 private:
  RunOptions base_;
  std::optional<double> calibrated_;
};

struct SuiteOptions {
  RunOptions base;
  double mst_hi = 200'000.0;
  double mst_rel_tol = 0.05;
  DurationNs run_duration = 60 * kNanosPerSecond;
  bool fluctuating_run = false;
  bool skew_run = false;
};

struct SuiteRun {
  std::string name;
  RunResult result;
};

struct SuiteReport {
  MstResult mst;
  std::vector<SuiteRun> runs;
};

/// The full experiment sequence: MST search, a full run at MST, a run at
/// 0.9 MST, then the optional fluctuating-load and single-key-skew runs.
SuiteReport run_suite(const SuiteOptions& options);

}  // namespace streamgauge
