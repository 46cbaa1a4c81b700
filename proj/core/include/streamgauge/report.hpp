#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "streamgauge/config.hpp"
#include "streamgauge/driver.hpp"

namespace streamgauge {

struct MissingArtifacts : std::runtime_error {
  explicit MissingArtifacts(const std::string& what)
      : std::runtime_error("missing artifacts: " + what) {}
};

/// Per-run artifacts: summary.json, latency_series.csv, queues.csv and one
/// queue_<i>.csv per driver queue.
void write_run_artifacts(const std::filesystem::path& run_dir, const RunResult& result,
                         double warmup_fraction);

/// suite.json plus one subdirectory per run.
void write_suite_artifacts(const std::filesystem::path& suite_dir, const SuiteReport& report,
                           const BenchConfig& config);

/// Renders the latency summary table and gnuplot-ready .dat series from a
/// suite directory's artifacts. Pure function of the directory contents:
/// re-running produces byte-identical files.
void write_report(const std::filesystem::path& suite_dir);

std::string verdict_json(const Verdict& v);

}  // namespace streamgauge
