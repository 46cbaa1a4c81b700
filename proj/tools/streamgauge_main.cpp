#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "streamgauge/config.hpp"
#include "streamgauge/driver.hpp"
#include "streamgauge/remote.hpp"
#include "streamgauge/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUnsustainable = 3;

std::filesystem::path timestamped_dir(const std::filesystem::path& base) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char name[64];
  std::strftime(name, sizeof(name), "suite-%Y%m%d-%H%M%S", &tm);
  std::filesystem::path dir = base / name;
  int n = 1;
  while (std::filesystem::exists(dir)) {
    dir = base / (std::string(name) + "-" + std::to_string(n++));
  }
  return dir;
}

int cmd_run(const std::string& config_path) {
  const streamgauge::BenchConfig config = streamgauge::load_config(config_path);
  const streamgauge::SuiteReport report = streamgauge::run_suite(config.suite_options());
  const std::filesystem::path dir = timestamped_dir(config.output_dir);
  streamgauge::write_suite_artifacts(dir, report, config);
  streamgauge::write_report(dir);
  std::printf("suite artifacts: %s\n", dir.string().c_str());
  std::printf("mst: %.0f events/s%s\n", report.mst.mst_rate,
              report.mst.ceiling_reached ? " (search ceiling reached)" : "");

  bool any_invalid = false;
  bool any_unsustainable = false;
  for (const streamgauge::SuiteRun& run : report.runs) {
    const streamgauge::Verdict& v = run.result.verdict;
    std::printf("run %-12s %s (%s)\n", run.name.c_str(),
                v.sustainable ? "sustainable" : "unsustainable",
                streamgauge::to_string(v.reason));
    if (!run.result.valid_metrics) any_invalid = true;
    const bool optional_run = run.name == "fluctuating" || run.name == "skew";
    if (!v.sustainable && !optional_run) any_unsustainable = true;
  }
  if (any_invalid) return kExitRuntime;
  if (any_unsustainable) return kExitUnsustainable;
  return kExitOk;
}

int cmd_find_mst(const std::string& config_path, double hi_override, double tol_override) {
  const streamgauge::BenchConfig config = streamgauge::load_config(config_path);
  streamgauge::SuiteOptions suite = config.suite_options();
  const double hi = hi_override > 0.0 ? hi_override : suite.mst_hi;
  const double tol = tol_override > 0.0 ? tol_override : suite.mst_rel_tol;
  streamgauge::ExperimentDriver driver(suite.base);
  const streamgauge::MstResult result = driver.find_mst(0.0, hi, tol);
  for (const auto& [rate, verdict] : result.probes) {
    std::printf("probe %12.0f events/s -> %s (%s)\n", rate,
                verdict.sustainable ? "sustainable" : "unsustainable",
                streamgauge::to_string(verdict.reason));
  }
  std::printf("mst: %.0f events/s%s\n", result.mst_rate,
              result.ceiling_reached ? " (search ceiling reached)" : "");
  return kExitOk;
}

int cmd_report(const std::string& run_dir) {
  streamgauge::write_report(run_dir);
  std::printf("report written under %s\n", run_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamgauge: latency and sustainable-throughput harness for stream engines"};
  app.require_subcommand(1);

  std::string config_path;
  std::string report_dir;
  double hi = 0.0;
  double tol = 0.0;

  CLI::App* run = app.add_subcommand("run", "execute the full experiment suite");
  run->add_option("config", config_path, "JSON config file")->required();

  CLI::App* find = app.add_subcommand("find-mst", "search the maximum sustainable throughput");
  find->add_option("config", config_path, "JSON config file")->required();
  find->add_option("--hi", hi, "search ceiling, events/s");
  find->add_option("--tol", tol, "relative termination tolerance");

  CLI::App* report = app.add_subcommand("report", "render tables and plot data from artifacts");
  report->add_option("dir", report_dir, "suite artifact directory")->required();

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path);
    if (find->parsed()) return cmd_find_mst(config_path, hi, tol);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const streamgauge::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitValidation;
  } catch (const streamgauge::MissingArtifacts& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitRuntime;
  } catch (const streamgauge::NothingSustainable& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUnsustainable;
  } catch (const streamgauge::SutConnectionLost& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitRuntime;
  } catch (const streamgauge::ConnectionRefusedError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
