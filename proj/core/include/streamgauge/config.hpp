#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "streamgauge/driver.hpp"
#include "streamgauge/generator.hpp"
#include "streamgauge/sut.hpp"
#include "streamgauge/window.hpp"

namespace streamgauge {

/// Validation failure with the offending field path (e.g. "window.slide").
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_path(field) {}
  std::string field_path;
};

/// Plain engine knobs as they appear in config files (the runtime
/// EngineConfig additionally carries clocks and test hooks).
struct EngineParams {
  double service_rate_cap = 0.0;    // events/s; 0 = uncapped
  double partition_rate_cap = 0.0;  // events/s per partition; 0 = uncapped
  std::uint64_t buffer_size = 8192;

  friend bool operator==(const EngineParams&, const EngineParams&) = default;
};

struct SuiteParams {
  double mst_hi = 200'000.0;
  double mst_rel_tol = 0.05;
  double run_duration_s = 60.0;
  double warmup_fraction = 0.25;
  bool fluctuating_run = false;
  bool skew_run = false;
  bool dump_raw_samples = false;  // per-output raw latencies next to the series

  friend bool operator==(const SuiteParams&, const SuiteParams&) = default;
};

struct BenchConfig {
  QueryKind query = QueryKind::agg;
  WindowSpec window{seconds_ns(8), seconds_ns(4), TimeSemantics::event_time};
  GeneratorConfig generator;
  SutDescriptor sut;
  EngineParams engine;
  SustainabilityPolicy policy;
  SuiteParams suite;
  std::optional<RateSchedule> schedule;  // explicit override for fixed runs
  std::string output_dir = "streamgauge-out";

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;

  EngineConfig engine_config() const;
  RunOptions run_options() const;
  SuiteOptions suite_options() const;
};

/// Parses and validates a JSON config document. Unknown keys are rejected so
/// typos surface immediately.
BenchConfig parse_config(const std::string& json_text);
std::string serialize_config(const BenchConfig& config);

/// Reads the file and applies the STREAMGAUGE_OUT output_dir override (the
/// only environment variable the tool honors).
BenchConfig load_config(const std::string& path);

}  // namespace streamgauge
