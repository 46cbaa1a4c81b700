#include "streamgauge/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace streamgauge {

namespace {

using nlohmann::json;

/// Fails on unknown keys so config typos do not silently become defaults.
void check_keys(const json& node, const std::string& path, const std::set<std::string>& known) {
  if (!node.is_object()) throw ConfigError(path, "must be an object");
  for (const auto& [key, value] : node.items()) {
    if (!known.contains(key)) throw ConfigError(path + "." + key, "unknown key");
  }
}

template <typename T>
T get_or(const json& node, const std::string& path, const char* key, T fallback) {
  if (!node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "wrong type");
  }
}

QueryKind parse_query(const std::string& s, const std::string& path) {
  if (s == "agg") return QueryKind::agg;
  if (s == "join") return QueryKind::join;
  throw ConfigError(path, "expected \"agg\" or \"join\"");
}

TimeSemantics parse_semantics(const std::string& s, const std::string& path) {
  if (s == "event_time") return TimeSemantics::event_time;
  if (s == "processing_time") return TimeSemantics::processing_time;
  throw ConfigError(path, "expected \"event_time\" or \"processing_time\"");
}

KeyDistMode parse_key_mode(const std::string& s, const std::string& path) {
  if (s == "normal") return KeyDistMode::normal;
  if (s == "single_key") return KeyDistMode::single_key;
  if (s == "uniform") return KeyDistMode::uniform;
  throw ConfigError(path, "expected \"normal\", \"single_key\" or \"uniform\"");
}

}  // namespace

EngineConfig BenchConfig::engine_config() const {
  EngineConfig cfg;
  cfg.query = query;
  cfg.window = window;
  if (engine.service_rate_cap > 0.0) cfg.service_rate_cap = engine.service_rate_cap;
  if (engine.partition_rate_cap > 0.0) cfg.partition_rate_cap = engine.partition_rate_cap;
  cfg.buffer_size = engine.buffer_size;
  return cfg;
}

RunOptions BenchConfig::run_options() const {
  RunOptions opts;
  opts.generator = generator;
  opts.sut = sut;
  opts.engine = engine_config();
  opts.policy = policy;
  opts.warmup_fraction = suite.warmup_fraction;
  opts.dump_raw_samples = suite.dump_raw_samples;
  if (schedule) {
    opts.schedule = *schedule;
  } else {
    opts.schedule = RateSchedule::constant(generator.rate_per_instance * generator.instances,
                                           seconds_ns(suite.run_duration_s));
  }
  return opts;
}

SuiteOptions BenchConfig::suite_options() const {
  SuiteOptions opts;
  opts.base = run_options();
  opts.mst_hi = suite.mst_hi;
  opts.mst_rel_tol = suite.mst_rel_tol;
  opts.run_duration = seconds_ns(suite.run_duration_s);
  opts.fluctuating_run = suite.fluctuating_run;
  opts.skew_run = suite.skew_run;
  return opts;
}

BenchConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("$", std::string("not valid JSON: ") + e.what());
  }
  check_keys(root, "$",
             {"query", "window", "generator", "sut", "policy", "suite", "schedule",
              "output_dir"});

  BenchConfig cfg;
  cfg.query = parse_query(get_or<std::string>(root, "$", "query", "agg"), "query");

  if (root.contains("window")) {
    const json& w = root["window"];
    check_keys(w, "window", {"range_ms", "slide_ms", "semantics"});
    cfg.window.range = millis_ns(get_or<double>(w, "window", "range_ms", 8000.0));
    cfg.window.slide = millis_ns(get_or<double>(w, "window", "slide_ms", 4000.0));
    cfg.window.semantics =
        parse_semantics(get_or<std::string>(w, "window", "semantics", "event_time"),
                        "window.semantics");
    if (cfg.window.range <= 0) throw ConfigError("window.range_ms", "must be positive");
    if (cfg.window.slide <= 0) throw ConfigError("window.slide_ms", "must be positive");
    if (cfg.window.slide > cfg.window.range) {
      throw ConfigError("window.slide", "slide must not exceed range");
    }
  }

  if (cfg.query == QueryKind::join) cfg.generator.purchases_share = 0.5;
  if (root.contains("generator")) {
    const json& g = root["generator"];
    check_keys(g, "generator",
               {"instances", "rate_per_instance", "total_events", "seed", "purchases_share",
                "price_min_cents", "price_max_cents", "keys", "logical_time"});
    cfg.generator.instances = get_or<std::uint32_t>(g, "generator", "instances", 2);
    cfg.generator.rate_per_instance =
        get_or<double>(g, "generator", "rate_per_instance", 10'000.0);
    cfg.generator.total_events = get_or<std::uint64_t>(g, "generator", "total_events", 0);
    cfg.generator.seed = get_or<std::uint64_t>(g, "generator", "seed", 1);
    // The join workload defaults to a 1:1 purchases:ads mix.
    cfg.generator.purchases_share = get_or<double>(
        g, "generator", "purchases_share", cfg.query == QueryKind::join ? 0.5 : 1.0);
    cfg.generator.price_min_cents = get_or<std::uint64_t>(g, "generator", "price_min_cents", 1);
    cfg.generator.price_max_cents =
        get_or<std::uint64_t>(g, "generator", "price_max_cents", 9'999);
    cfg.generator.logical_time = get_or<bool>(g, "generator", "logical_time", false);
    if (cfg.generator.instances == 0) throw ConfigError("generator.instances", "must be > 0");
    if (cfg.generator.rate_per_instance <= 0.0) {
      throw ConfigError("generator.rate_per_instance", "must be > 0");
    }
    if (cfg.generator.purchases_share < 0.0 || cfg.generator.purchases_share > 1.0) {
      throw ConfigError("generator.purchases_share", "must be in [0, 1]");
    }
    if (cfg.generator.price_min_cents > cfg.generator.price_max_cents) {
      throw ConfigError("generator.price_min_cents", "min exceeds max");
    }
    if (g.contains("keys")) {
      const json& k = g["keys"];
      check_keys(k, "generator.keys", {"mode", "key_space", "mean", "stddev", "fixed_key"});
      KeyDistribution dist;
      dist.mode =
          parse_key_mode(get_or<std::string>(k, "generator.keys", "mode", "normal"),
                         "generator.keys.mode");
      dist.key_space = get_or<std::uint64_t>(k, "generator.keys", "key_space", 10'000);
      dist.mean = get_or<double>(k, "generator.keys", "mean",
                                 static_cast<double>(dist.key_space) / 2.0);
      dist.stddev = get_or<double>(k, "generator.keys", "stddev",
                                   static_cast<double>(dist.key_space) / 10.0);
      dist.fixed_key = get_or<std::uint64_t>(k, "generator.keys", "fixed_key", 0);
      if (!dist.valid()) throw ConfigError("generator.keys", "invalid distribution");
      cfg.generator.key_dist = dist;
    }
  }

  if (root.contains("sut")) {
    const json& s = root["sut"];
    check_keys(s, "sut", {"name", "mode", "address", "engine"});
    cfg.sut.name = get_or<std::string>(s, "sut", "name", "reference");
    const std::string mode = get_or<std::string>(s, "sut", "mode", "in_process");
    if (mode == "in_process") {
      cfg.sut.mode = SutMode::in_process;
    } else if (mode == "remote") {
      cfg.sut.mode = SutMode::remote;
    } else {
      throw ConfigError("sut.mode", "expected \"in_process\" or \"remote\"");
    }
    cfg.sut.address = get_or<std::string>(s, "sut", "address", "");
    if (cfg.sut.mode == SutMode::remote && cfg.sut.address.empty()) {
      throw ConfigError("sut.address", "required in remote mode");
    }
    if (s.contains("engine")) {
      const json& e = s["engine"];
      check_keys(e, "sut.engine", {"service_rate_cap", "partition_rate_cap", "buffer_size"});
      cfg.engine.service_rate_cap = get_or<double>(e, "sut.engine", "service_rate_cap", 0.0);
      cfg.engine.partition_rate_cap =
          get_or<double>(e, "sut.engine", "partition_rate_cap", 0.0);
      cfg.engine.buffer_size = get_or<std::uint64_t>(e, "sut.engine", "buffer_size", 8192);
      if (cfg.engine.buffer_size == 0) throw ConfigError("sut.engine.buffer_size", "must be >= 1");
    }
  }
  cfg.sut.sources = cfg.generator.instances;

  if (root.contains("policy")) {
    const json& p = root["policy"];
    check_keys(p, "policy",
               {"depth_cap_seconds", "slope_epsilon_fraction", "observation_fraction",
                "min_run_seconds", "max_queue_depth", "growth_slope_epsilon",
                "early_abort_factor"});
    cfg.policy.depth_cap_seconds = get_or<double>(p, "policy", "depth_cap_seconds", 5.0);
    cfg.policy.slope_epsilon_fraction =
        get_or<double>(p, "policy", "slope_epsilon_fraction", 0.01);
    cfg.policy.observation_fraction =
        get_or<double>(p, "policy", "observation_fraction", 0.5);
    cfg.policy.min_run_seconds = get_or<double>(p, "policy", "min_run_seconds", 30.0);
    cfg.policy.max_queue_depth = get_or<std::uint64_t>(p, "policy", "max_queue_depth", 0);
    cfg.policy.growth_slope_epsilon =
        get_or<double>(p, "policy", "growth_slope_epsilon", 0.0);
    cfg.policy.early_abort_factor = get_or<double>(p, "policy", "early_abort_factor", 1.5);
    if (cfg.policy.depth_cap_seconds <= 0.0) {
      throw ConfigError("policy.depth_cap_seconds", "must be > 0");
    }
    if (cfg.policy.observation_fraction <= 0.0 || cfg.policy.observation_fraction > 1.0) {
      throw ConfigError("policy.observation_fraction", "must be in (0, 1]");
    }
    if (cfg.policy.min_run_seconds <= 0.0) {
      throw ConfigError("policy.min_run_seconds", "must be > 0");
    }
  }

  if (root.contains("suite")) {
    const json& s = root["suite"];
    check_keys(s, "suite",
               {"mst_hi", "mst_rel_tol", "run_duration_s", "warmup_fraction",
                "fluctuating_run", "skew_run", "dump_raw_samples"});
    cfg.suite.mst_hi = get_or<double>(s, "suite", "mst_hi", 200'000.0);
    cfg.suite.mst_rel_tol = get_or<double>(s, "suite", "mst_rel_tol", 0.05);
    cfg.suite.run_duration_s = get_or<double>(s, "suite", "run_duration_s", 60.0);
    cfg.suite.warmup_fraction = get_or<double>(s, "suite", "warmup_fraction", 0.25);
    cfg.suite.fluctuating_run = get_or<bool>(s, "suite", "fluctuating_run", false);
    cfg.suite.skew_run = get_or<bool>(s, "suite", "skew_run", false);
    cfg.suite.dump_raw_samples = get_or<bool>(s, "suite", "dump_raw_samples", false);
    if (cfg.suite.mst_hi <= 0.0) throw ConfigError("suite.mst_hi", "must be > 0");
    if (cfg.suite.mst_rel_tol <= 0.0 || cfg.suite.mst_rel_tol >= 1.0) {
      throw ConfigError("suite.mst_rel_tol", "must be in (0, 1)");
    }
    if (cfg.suite.warmup_fraction < 0.0 || cfg.suite.warmup_fraction >= 1.0) {
      throw ConfigError("suite.warmup_fraction", "must be in [0, 1)");
    }
  }

  if (root.contains("schedule")) {
    const json& sched = root["schedule"];
    if (!sched.is_array() || sched.empty()) {
      throw ConfigError("schedule", "must be a non-empty array");
    }
    RateSchedule schedule;
    std::size_t i = 0;
    for (const json& seg : sched) {
      const std::string path = "schedule[" + std::to_string(i) + "]";
      check_keys(seg, path, {"duration_s", "rate"});
      RateSegment rs;
      rs.duration = seconds_ns(get_or<double>(seg, path, "duration_s", 0.0));
      rs.rate = get_or<double>(seg, path, "rate", 0.0);
      if (rs.duration <= 0) throw ConfigError(path + ".duration_s", "must be > 0");
      if (rs.rate <= 0.0) throw ConfigError(path + ".rate", "must be > 0");
      schedule.segments.push_back(rs);
      ++i;
    }
    cfg.schedule = schedule;
  }

  cfg.output_dir = get_or<std::string>(root, "$", "output_dir", "streamgauge-out");
  return cfg;
}

std::string serialize_config(const BenchConfig& cfg) {
  json root;
  root["query"] = cfg.query == QueryKind::agg ? "agg" : "join";
  root["window"] = {
      {"range_ms", static_cast<double>(cfg.window.range) / kNanosPerMilli},
      {"slide_ms", static_cast<double>(cfg.window.slide) / kNanosPerMilli},
      {"semantics",
       cfg.window.semantics == TimeSemantics::event_time ? "event_time" : "processing_time"},
  };
  const char* key_mode = cfg.generator.key_dist.mode == KeyDistMode::normal ? "normal"
                         : cfg.generator.key_dist.mode == KeyDistMode::single_key
                             ? "single_key"
                             : "uniform";
  root["generator"] = {
      {"instances", cfg.generator.instances},
      {"rate_per_instance", cfg.generator.rate_per_instance},
      {"total_events", cfg.generator.total_events},
      {"seed", cfg.generator.seed},
      {"purchases_share", cfg.generator.purchases_share},
      {"price_min_cents", cfg.generator.price_min_cents},
      {"price_max_cents", cfg.generator.price_max_cents},
      {"logical_time", cfg.generator.logical_time},
      {"keys",
       {{"mode", key_mode},
        {"key_space", cfg.generator.key_dist.key_space},
        {"mean", cfg.generator.key_dist.mean},
        {"stddev", cfg.generator.key_dist.stddev},
        {"fixed_key", cfg.generator.key_dist.fixed_key}}},
  };
  root["sut"] = {
      {"name", cfg.sut.name},
      {"mode", cfg.sut.mode == SutMode::in_process ? "in_process" : "remote"},
      {"address", cfg.sut.address},
      {"engine",
       {{"service_rate_cap", cfg.engine.service_rate_cap},
        {"partition_rate_cap", cfg.engine.partition_rate_cap},
        {"buffer_size", cfg.engine.buffer_size}}},
  };
  root["policy"] = {
      {"depth_cap_seconds", cfg.policy.depth_cap_seconds},
      {"slope_epsilon_fraction", cfg.policy.slope_epsilon_fraction},
      {"observation_fraction", cfg.policy.observation_fraction},
      {"min_run_seconds", cfg.policy.min_run_seconds},
      {"max_queue_depth", cfg.policy.max_queue_depth},
      {"growth_slope_epsilon", cfg.policy.growth_slope_epsilon},
      {"early_abort_factor", cfg.policy.early_abort_factor},
  };
  root["suite"] = {
      {"mst_hi", cfg.suite.mst_hi},
      {"mst_rel_tol", cfg.suite.mst_rel_tol},
      {"run_duration_s", cfg.suite.run_duration_s},
      {"warmup_fraction", cfg.suite.warmup_fraction},
      {"fluctuating_run", cfg.suite.fluctuating_run},
      {"skew_run", cfg.suite.skew_run},
      {"dump_raw_samples", cfg.suite.dump_raw_samples},
  };
  if (cfg.schedule) {
    json segs = json::array();
    for (const RateSegment& seg : cfg.schedule->segments) {
      segs.push_back({{"duration_s", to_seconds(seg.duration)}, {"rate", seg.rate}});
    }
    root["schedule"] = segs;
  }
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

BenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  BenchConfig cfg = parse_config(buffer.str());
  if (const char* out = std::getenv("STREAMGAUGE_OUT"); out != nullptr && *out != '\0') {
    cfg.output_dir = out;
  }
  return cfg;
}

}  // namespace streamgauge
