#include "streamgauge/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "streamgauge/metrics.hpp"

namespace streamgauge {

namespace {

using nlohmann::json;

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifacts(path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json summary_to_json(const MetricsSummary& s) {
  return json{
      {"avg_s", to_seconds(s.avg)}, {"min_s", to_seconds(s.min)},
      {"max_s", to_seconds(s.max)}, {"q90_s", to_seconds(s.q90)},
      {"q95_s", to_seconds(s.q95)}, {"q99_s", to_seconds(s.q99)},
      {"stddev_s", s.stddev / static_cast<double>(kNanosPerSecond)},
      {"n", s.n},
  };
}

json verdict_to_json(const Verdict& v) {
  json evidence = json::array();
  for (const QueueSample& s : v.evidence) {
    evidence.push_back({{"second", s.second},
                        {"depth", s.depth()},
                        {"offered_total", s.offered_total},
                        {"taken_total", s.taken_total}});
  }
  return json{
      {"sustainable", v.sustainable},
      {"reason", to_string(v.reason)},
      {"offered_rate", v.offered_rate},
      {"depth_slope", v.depth_slope},
      {"max_tail_depth", v.max_tail_depth},
      {"q_max", v.q_max},
      {"slope_eps", v.slope_eps},
      {"evidence", evidence},
  };
}

}  // namespace

std::string verdict_json(const Verdict& v) { return verdict_to_json(v).dump(2) + "\n"; }

void write_run_artifacts(const std::filesystem::path& run_dir, const RunResult& result,
                         double warmup_fraction) {
  std::filesystem::create_directories(run_dir);

  json summary;
  summary["verdict"] = verdict_to_json(result.verdict);
  summary["valid_metrics"] = result.valid_metrics;
  summary["offered_peak_rate"] = result.offered_peak_rate;
  summary["scheduled_duration_s"] = to_seconds(result.scheduled_duration);
  summary["warmup_fraction"] = warmup_fraction;
  std::uint64_t emitted = 0;
  double worst_pacing = 0.0;
  for (const GenerationReport& g : result.generation) {
    emitted += g.events_emitted;
    worst_pacing = std::max(worst_pacing, g.max_pacing_error);
  }
  summary["events_generated"] = emitted;
  summary["max_pacing_error"] = worst_pacing;
  summary["engine"] = {{"events_processed", result.engine_report.events_processed},
                       {"windows_closed", result.engine_report.windows_closed},
                       {"windows_discarded", result.engine_report.windows_discarded}};
  if (result.valid_metrics) {
    summary["outputs_recorded"] = result.metrics.recorded;
    summary["anomalies"] = result.metrics.anomalies;
    const double run_s = to_seconds(result.scheduled_duration);
    try {
      summary["event_latency"] = summary_to_json(
          summarize(result.metrics, Metric::event_latency, warmup_fraction, run_s));
      summary["proc_latency"] = summary_to_json(
          summarize(result.metrics, Metric::proc_latency, warmup_fraction, run_s));
    } catch (const EmptyAfterWarmup&) {
      summary["event_latency"] = nullptr;
      summary["proc_latency"] = nullptr;
    }
  }
  write_file(run_dir / "summary.json", summary.dump(2) + "\n");

  if (result.valid_metrics) {
    write_file(run_dir / "latency_series.csv", series_csv(result.metrics));
    if (!result.metrics.raw.empty()) {
      write_file(run_dir / "raw_latency_samples.csv", raw_samples_csv(result.metrics));
    }
  }
  write_file(run_dir / "queues.csv", telemetry_csv(result.total_telemetry));
  for (std::size_t i = 0; i < result.queue_telemetry.size(); ++i) {
    write_file(run_dir / ("queue_" + std::to_string(i) + ".csv"),
               telemetry_csv(result.queue_telemetry[i]));
  }
}

void write_suite_artifacts(const std::filesystem::path& suite_dir, const SuiteReport& report,
                           const BenchConfig& config) {
  std::filesystem::create_directories(suite_dir);
  json suite;
  suite["config"] = json::parse(serialize_config(config));
  suite["mst"] = {{"rate", report.mst.mst_rate},
                  {"ceiling_reached", report.mst.ceiling_reached}};
  json probes = json::array();
  for (const auto& [rate, verdict] : report.mst.probes) {
    probes.push_back({{"rate", rate}, {"verdict", verdict_to_json(verdict)}});
  }
  suite["probes"] = probes;
  json runs = json::array();
  for (const SuiteRun& run : report.runs) {
    runs.push_back(run.name);
    write_run_artifacts(suite_dir / run.name, run.result, config.suite.warmup_fraction);
  }
  suite["runs"] = runs;
  write_file(suite_dir / "suite.json", suite.dump(2) + "\n");
}

namespace {

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", s);
  return buf;
}

struct SeriesRow {
  std::int64_t second;
  double p50, p90, p95, p99, avg, min, max;
};

std::map<std::string, std::vector<SeriesRow>> parse_series_csv(const std::string& text) {
  std::map<std::string, std::vector<SeriesRow>> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    SeriesRow row{};
    long long second = 0;
    char metric[16] = {0};
    if (std::sscanf(line.c_str(), "%lld,%15[^,],%lf,%lf,%lf,%lf,%lf,%lf,%lf", &second, metric,
                    &row.p50, &row.p90, &row.p95, &row.p99, &row.avg, &row.min,
                    &row.max) == 9) {
      row.second = second;
      out[metric].push_back(row);
    }
  }
  return out;
}

}  // namespace

void write_report(const std::filesystem::path& suite_dir) {
  const json suite = json::parse(read_file(suite_dir / "suite.json"));
  const std::string sut_name = suite["config"]["sut"]["name"].get<std::string>();

  std::string table =
      "run                     avg    min    max    (q90, q95, q99)   [event-time latency, s]\n";
  std::string proc_table =
      "run                     avg    min    max    (q90, q95, q99)   [processing-time latency, s]\n";
  for (const auto& run_name : suite["runs"]) {
    const std::string name = run_name.get<std::string>();
    const json run_summary = json::parse(read_file(suite_dir / name / "summary.json"));
    std::string label = sut_name;
    if (name == "mst90") label += "(90%)";
    else if (name != "mst") label += "(" + name + ")";
    const auto append_row = [&](std::string& dst, const char* key) {
      if (!run_summary.contains(key) || run_summary[key].is_null()) {
        dst += label + "  (no latency report)\n";
        return;
      }
      const json& s = run_summary[key];
      char line[256];
      std::snprintf(line, sizeof(line), "%-22s %6s %6s %6s   (%s, %s, %s)\n", label.c_str(),
                    format_seconds(s["avg_s"].get<double>()).c_str(),
                    format_seconds(s["min_s"].get<double>()).c_str(),
                    format_seconds(s["max_s"].get<double>()).c_str(),
                    format_seconds(s["q90_s"].get<double>()).c_str(),
                    format_seconds(s["q95_s"].get<double>()).c_str(),
                    format_seconds(s["q99_s"].get<double>()).c_str());
      dst += line;
    };
    append_row(table, "event_latency");
    append_row(proc_table, "proc_latency");

    // Gnuplot data: latency time series and ingestion throughput over time.
    if (std::filesystem::exists(suite_dir / name / "latency_series.csv")) {
      const auto series =
          parse_series_csv(read_file(suite_dir / name / "latency_series.csv"));
      for (const auto& [metric, rows] : series) {
        std::string dat = "# second p50 p90 p95 p99 avg\n";
        for (const SeriesRow& r : rows) {
          char line[192];
          std::snprintf(line, sizeof(line), "%lld %.6f %.6f %.6f %.6f %.6f\n",
                        static_cast<long long>(r.second), r.p50, r.p90, r.p95, r.p99, r.avg);
          dat += line;
        }
        write_file(suite_dir / (name + "_latency_" + metric + ".dat"), dat);
      }
    }
    const std::string queues = read_file(suite_dir / name / "queues.csv");
    std::istringstream in(queues);
    std::string line;
    std::getline(in, line);
    std::string dat = "# second take_rate offer_rate depth\n";
    while (std::getline(in, line)) {
      long long second = 0;
      unsigned long long depth = 0, offer = 0, take = 0;
      if (std::sscanf(line.c_str(), "%lld,%llu,%llu,%llu", &second, &depth, &offer, &take) == 4) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%lld %llu %llu %llu\n", second, take, offer, depth);
        dat += buf;
      }
    }
    write_file(suite_dir / (name + "_throughput.dat"), dat);
  }
  write_file(suite_dir / "latency_table.txt", table + "\n" + proc_table);
}

}  // namespace streamgauge
