#pragma once

// Experiment harness: configuration, single runs, sweeps, CSV and manifest
// persistence.
//
// Config files are flat `key = value` lines; `#` starts a comment. See
// README.md for the full key list.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "drsgt/engine.hpp"
#include "drsgt/errors.hpp"
#include "drsgt/metrics.hpp"
#include "drsgt/network.hpp"
#include "drsgt/oracle.hpp"
#include "drsgt/pca.hpp"
#include "drsgt/schedule.hpp"

namespace drsgt {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kCsvHeader = "k,f_gap,grad_norm,consensus,ds,samples_cum,comm_rounds_cum,wall_ms";
inline constexpr const char* kOutputDirEnv = "DRSGT_OUTPUT_DIR";
inline constexpr const char* kManifestName = "manifest.jsonl";

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string default_output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? std::string(env) : std::string("out");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("config field '" + key + "': cannot parse '" + raw + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config field '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace detail

/// Oracle selection: "sampled" (row sampling), "exact" (full gradient),
/// "enumerate" (row enumeration hook) or "synthetic:<sigma>".
struct OracleSpec {
  enum class Kind { kSampled, kExact, kEnumerate, kSynthetic } kind = Kind::kSampled;
  double sigma = 0.0;

  static OracleSpec parse(const std::string& text) {
    OracleSpec o;
    if (text == "sampled") return o;
    if (text == "exact") {
      o.kind = Kind::kExact;
      return o;
    }
    if (text == "enumerate") {
      o.kind = Kind::kEnumerate;
      return o;
    }
    if (text.rfind("synthetic:", 0) == 0) {
      o.kind = Kind::kSynthetic;
      o.sigma = detail::parse_number<double>("oracle", text.substr(10));
      if (!(o.sigma >= 0.0)) throw ConfigError("config field 'oracle': sigma must be >= 0");
      return o;
    }
    throw ConfigError("config field 'oracle': expected sampled|exact|enumerate|synthetic:<sigma>, got '" + text + "'");
  }
};

/// Reads "i j" pairs (0-based agent ids), one edge per line.
inline std::vector<Edge> load_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open edge list " + path);
  std::vector<Edge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    std::istringstream ls(line);
    int i = 0, j = 0;
    std::string extra;
    if (!(ls >> i >> j) || (ls >> extra)) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'i j'");
    edges.emplace_back(i, j);
  }
  return edges;
}

/// "ring", "complete", "star", "erdos_renyi:p[:seed]", "explicit:<path>".
inline TopologyKind parse_topology(const std::string& text) {
  if (text == "ring") return topology::Ring{};
  if (text == "complete") return topology::Complete{};
  if (text == "star") return topology::Star{};
  if (text.rfind("erdos_renyi:", 0) == 0) {
    const std::string rest = text.substr(12);
    const auto colon = rest.find(':');
    topology::ErdosRenyi er;
    er.p = detail::parse_number<double>("topology", rest.substr(0, colon));
    if (colon != std::string::npos) er.seed = detail::parse_number<std::uint64_t>("topology", rest.substr(colon + 1));
    return er;
  }
  if (text.rfind("explicit:", 0) == 0) return topology::Explicit{load_edge_list(text.substr(9))};
  throw ConfigError("config field 'topology': expected ring|complete|star|erdos_renyi:p[:seed]|explicit:<path>, got '" +
                    text + "'");
}

struct ExperimentConfig {
  std::string name = "run";
  // instance
  int agents = 4;
  int rows = 2500;
  int dim = 8;
  int rank = 3;
  double eigengap = 0.8;
  std::uint64_t instance_seed = 1;
  std::string instance_cache;
  // network
  std::string topology = "ring";
  int t = 1;
  // algorithm
  Algorithm algorithm = Algorithm::kDrsgt;
  double alpha = 1.0;
  double beta = 0.1;
  double beta_decay = 0.5;
  SampleSchedule schedule = SampleSchedule::polynomial(1.0);
  std::string oracle = "sampled";
  bool independent_init = false;
  std::uint64_t seed = 0;
  int audit_every = 50;
  // run
  std::uint64_t max_iters = 1000;
  std::uint64_t log_every = 1;
  double target_eps = 0.0;  // stop at first k with grad_norm^2 <= target_eps; 0 disables
  bool wall_clock = false;  // when false, wall_ms is written as 0 so output is replayable
  std::string output = default_output_dir();

  /// Sets one field from its textual form. Throws ConfigError naming the key.
  void set(const std::string& key, const std::string& raw) {
    const std::string value = detail::trim(raw);
    auto positive_int = [&](int& field) {
      const long long v = detail::parse_number<long long>(key, value);
      if (v < 1 || v > 1'000'000'000) throw ConfigError("config field '" + key + "': must be a positive integer");
      field = int(v);
    };
    auto unsigned_int = [&](std::uint64_t& field) {
      if (!value.empty() && value[0] == '-') throw ConfigError("config field '" + key + "': must be non-negative");
      field = detail::parse_number<std::uint64_t>(key, value);
    };
    auto positive_real = [&](double& field) {
      const double v = detail::parse_number<double>(key, value);
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("config field '" + key + "': must be > 0");
      field = v;
    };

    if (key == "name") {
      if (value.empty() || value.find_first_of("/\\ \t") != std::string::npos)
        throw ConfigError("config field 'name': must be non-empty without spaces or slashes");
      name = value;
    } else if (key == "agents") {
      positive_int(agents);
    } else if (key == "rows") {
      positive_int(rows);
    } else if (key == "dim") {
      positive_int(dim);
    } else if (key == "rank") {
      positive_int(rank);
    } else if (key == "eigengap") {
      const double v = detail::parse_number<double>(key, value);
      if (!(v > 0.0 && v <= 1.0)) throw ConfigError("config field 'eigengap': must be in (0, 1]");
      eigengap = v;
    } else if (key == "instance_seed") {
      unsigned_int(instance_seed);
    } else if (key == "instance_cache") {
      instance_cache = value;
    } else if (key == "topology") {
      if (value.rfind("explicit:", 0) != 0) parse_topology(value);  // validate eagerly
      topology = value;
    } else if (key == "t") {
      positive_int(t);
    } else if (key == "algorithm") {
      if (value == "drsgt") {
        algorithm = Algorithm::kDrsgt;
      } else if (value == "drsgd") {
        algorithm = Algorithm::kDrsgd;
      } else {
        throw ConfigError("config field 'algorithm': expected drsgt|drsgd, got '" + value + "'");
      }
    } else if (key == "alpha") {
      positive_real(alpha);
    } else if (key == "beta") {
      positive_real(beta);
    } else if (key == "beta_decay") {
      const double v = detail::parse_number<double>(key, value);
      if (!(v >= 0.0)) throw ConfigError("config field 'beta_decay': must be >= 0");
      beta_decay = v;
    } else if (key == "schedule") {
      try {
        schedule = SampleSchedule::parse(value);
      } catch (const ScheduleError& e) {
        throw ConfigError(std::string("config field 'schedule': ") + e.what());
      }
    } else if (key == "oracle") {
      OracleSpec::parse(value);
      oracle = value;
    } else if (key == "init") {
      if (value == "common") {
        independent_init = false;
      } else if (value == "independent") {
        independent_init = true;
      } else {
        throw ConfigError("config field 'init': expected common|independent, got '" + value + "'");
      }
    } else if (key == "seed") {
      unsigned_int(seed);
    } else if (key == "audit_every") {
      positive_int(audit_every);
    } else if (key == "max_iters") {
      unsigned_int(max_iters);
    } else if (key == "log_every") {
      unsigned_int(log_every);
      if (log_every == 0) throw ConfigError("config field 'log_every': must be >= 1");
    } else if (key == "target_eps") {
      const double v = detail::parse_number<double>(key, value);
      if (!(v >= 0.0)) throw ConfigError("config field 'target_eps': must be >= 0");
      target_eps = v;
    } else if (key == "wall_clock") {
      wall_clock = detail::parse_bool(key, value);
    } else if (key == "output") {
      if (value.empty()) throw ConfigError("config field 'output': must be non-empty");
      output = value;
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }

  /// Cross-field checks that single-field parsing cannot do.
  void validate() const {
    if (agents < 2) throw ConfigError("config field 'agents': need at least 2 agents");
    if (rank >= dim) throw ConfigError("config field 'rank': must be smaller than 'dim'");
  }

  KeyValues to_map() const {
    return {
        {"name", name},
        {"agents", std::to_string(agents)},
        {"rows", std::to_string(rows)},
        {"dim", std::to_string(dim)},
        {"rank", std::to_string(rank)},
        {"eigengap", detail::format_double(eigengap)},
        {"instance_seed", std::to_string(instance_seed)},
        {"instance_cache", instance_cache},
        {"topology", topology},
        {"t", std::to_string(t)},
        {"algorithm", to_string(algorithm)},
        {"alpha", detail::format_double(alpha)},
        {"beta", detail::format_double(beta)},
        {"beta_decay", detail::format_double(beta_decay)},
        {"schedule", schedule.to_string()},
        {"oracle", oracle},
        {"init", independent_init ? "independent" : "common"},
        {"seed", std::to_string(seed)},
        {"audit_every", std::to_string(audit_every)},
        {"max_iters", std::to_string(max_iters)},
        {"log_every", std::to_string(log_every)},
        {"target_eps", detail::format_double(target_eps)},
        {"wall_clock", wall_clock ? "true" : "false"},
        {"output", output},
    };
  }

  AlgoConfig algo() const {
    AlgoConfig a;
    a.algorithm = algorithm;
    a.alpha = alpha;
    a.beta = beta;
    a.beta_decay = beta_decay;
    a.t = t;
    a.schedule = schedule;
    a.seed = seed;
    a.audit_every = audit_every;
    a.independent_init = independent_init;
    return a;
  }
};

/// Parses config text. `source` names the origin in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

/// Applies "key=value" overrides (a leading "--" is accepted and stripped).
inline void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (std::string o : overrides) {
    if (o.rfind("--", 0) == 0) o = o.substr(2);
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected key=value");
    std::string key = o.substr(0, eq);
    std::replace(key.begin(), key.end(), '-', '_');
    cfg.set(key, o.substr(eq + 1));
  }
}

/// Generates the configured instance, or loads/writes it through the cache.
inline PcaProblem load_or_generate_instance(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  if (!cfg.instance_cache.empty() && fs::exists(cfg.instance_cache)) {
    PcaProblem p = read_instance(cfg.instance_cache);
    if (p.n_agents() != cfg.agents || p.n() != cfg.dim || p.r() != cfg.rank) {
      throw ConfigError("instance cache " + cfg.instance_cache + " does not match agents/dim/rank of the config");
    }
    return p;
  }
  PcaProblem p = generate_pca_instance(cfg.agents, cfg.rows, cfg.dim, cfg.rank, cfg.eigengap, cfg.instance_seed);
  if (!cfg.instance_cache.empty()) write_instance(p, cfg.instance_cache);
  return p;
}

inline std::string format_csv_row(const MetricsRow& r) {
  std::string s = std::to_string(r.k);
  for (double v : {r.f_gap, r.grad_norm, r.consensus, r.ds}) {
    s += ',';
    s += detail::format_double(v);
  }
  s += ',' + std::to_string(r.samples_cum) + ',' + std::to_string(r.comm_rounds_cum) + ',' + std::to_string(r.wall_ms);
  return s;
}

struct RunResult {
  std::string run_id;
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
  nlohmann::ordered_json summary;
  std::vector<MetricsRow> rows;  // rows written to the CSV
};

namespace detail {

template <class Oracle>
RunResult run_with_oracle(const ExperimentConfig& cfg, const PcaProblem& problem, const NetworkSpec& net,
                          const Oracle& oracle, double sigma_sq_estimate,
                          const std::function<void(const std::string&)>& warn) {
  namespace fs = std::filesystem;
  Engine<Oracle> engine(oracle, net, cfg.algo(), problem.n(), problem.r());
  for (const auto& w : engine.warnings()) warn(w);

  fs::create_directories(cfg.output);
  RunResult res;
  res.run_id = cfg.name;
  res.csv_path = fs::path(cfg.output) / (cfg.name + ".csv");
  res.summary_path = fs::path(cfg.output) / (cfg.name + ".summary.json");
  std::ofstream csv(res.csv_path, std::ios::trunc);
  if (!csv) throw Error("cannot open " + res.csv_path.string() + " for writing");
  csv << "# schema=" << kCsvSchemaVersion << '\n' << kCsvHeader << '\n';

  const auto start = std::chrono::steady_clock::now();
  double min_grad_sq = std::numeric_limits<double>::infinity();
  bool target_reached = false;
  MetricsRow last;
  bool last_written = false;

  auto sink = [&](const Engine<Oracle>& e) {
    std::uint64_t wall = 0;
    if (cfg.wall_clock) {
      wall = std::uint64_t(
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
    }
    last = compute_metrics(problem, e.points(), e.counters(), wall);
    last_written = false;
    if (!last.degenerate()) min_grad_sq = std::min(min_grad_sq, last.grad_norm * last.grad_norm);
    if (last.k % cfg.log_every == 0) {
      csv << format_csv_row(last) << '\n';
      res.rows.push_back(last);
      last_written = true;
    }
    if (cfg.target_eps > 0.0 && !last.degenerate() && last.grad_norm * last.grad_norm <= cfg.target_eps) {
      target_reached = true;
      return SinkAction::kStop;
    }
    return SinkAction::kContinue;
  };
  const RunSummary summary = run(engine, cfg.max_iters, sink);
  if (!last_written) {
    csv << format_csv_row(last) << '\n';
    res.rows.push_back(last);
  }
  csv.flush();
  if (!csv) throw Error("write failed for " + res.csv_path.string());

  const SpectralDiagnostics diag = spectral_diagnostics(net, cfg.t);
  auto& s = res.summary;
  s["run_id"] = cfg.name;
  s["algorithm"] = to_string(cfg.algorithm);
  s["iterations"] = summary.counters.iteration;
  s["samples_cum"] = summary.counters.samples;
  s["comm_rounds_cum"] = summary.counters.comm_rounds;
  s["min_grad_norm_sq"] = min_grad_sq;
  s["final"] = {{"f_gap", last.f_gap}, {"grad_norm", last.grad_norm}, {"consensus", last.consensus}, {"ds", last.ds}};
  s["target_eps"] = cfg.target_eps;
  s["target_reached"] = target_reached;
  s["sigma_sq_estimate"] = sigma_sq_estimate;
  s["sigma2"] = diag.sigma2;
  s["t_min"] = diag.t_min;
  s["edges"] = net.edge_count();
  s["warnings"] = engine.warnings();

  std::ofstream js(res.summary_path, std::ios::trunc);
  js << s.dump(2) << '\n';
  return res;
}

}  // namespace detail

/// Builds (or reuses) the instance, builds the network, runs the engine and
/// writes `<output>/<name>.csv` plus `<output>/<name>.summary.json`.
/// Rows are emitted for k = 0, log_every, 2 log_every, ... and the final k.
inline RunResult run_experiment(const ExperimentConfig& cfg, const PcaProblem* shared_instance = nullptr,
                                const std::function<void(const std::string&)>& warn = {}) {
  cfg.validate();
  std::optional<PcaProblem> owned;
  if (!shared_instance) owned.emplace(load_or_generate_instance(cfg));
  const PcaProblem& problem = shared_instance ? *shared_instance : *owned;
  if (problem.n_agents() != cfg.agents) throw ConfigError("instance agent count does not match config 'agents'");
  const NetworkSpec net = build_topology(parse_topology(cfg.topology), cfg.agents);
  const OracleSpec spec = OracleSpec::parse(cfg.oracle);
  auto warn_fn = warn ? warn : [](const std::string&) {};

  switch (spec.kind) {
    case OracleSpec::Kind::kSampled: {
      const PcaRowSampler oracle(problem);
      // sigma^2 at X*, averaged over agents, from a stream the engine never uses.
      double var = 0.0;
      for (int i = 0; i < problem.n_agents(); ++i) {
        Rng rng = make_stream(cfg.seed, 1'000'000 + std::uint64_t(i));
        var += empirical_variance(oracle, i, problem.x_star(), 1, 1000, rng);
      }
      return detail::run_with_oracle(cfg, problem, net, oracle, var / problem.n_agents(), warn_fn);
    }
    case OracleSpec::Kind::kExact:
      return detail::run_with_oracle(cfg, problem, net, PcaExactOracle(problem), 0.0, warn_fn);
    case OracleSpec::Kind::kEnumerate:
      return detail::run_with_oracle(cfg, problem, net,
                                     PcaRowSampler(problem, PcaRowSampler::Mode::kEnumerateRows), 0.0, warn_fn);
    case OracleSpec::Kind::kSynthetic:
      return detail::run_with_oracle(cfg, problem, net, SyntheticNoiseOracle(problem, spec.sigma),
                                     spec.sigma * spec.sigma, warn_fn);
  }
  throw ConfigError("unreachable oracle kind");
}

struct ManifestRecord {
  std::string run_id;
  bool ok = true;
  std::string error;
  std::string error_kind;  // "config" or "engine" when !ok
  std::string csv;         // file name relative to the manifest
  KeyValues config;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["status"] = ok ? "ok" : "error";
    if (ok) {
      j["csv"] = csv;
      j["summary"] = run_id + ".summary.json";
    } else {
      j["error_kind"] = error_kind;
      j["error"] = error;
    }
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) c[k] = v;
    j["config"] = c;
    return j;
  }
};

inline void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestRecord>& records, bool append) {
  std::filesystem::create_directories(dir);
  const auto path = dir / kManifestName;
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string());
  for (const auto& r : records) os << r.to_json().dump() << '\n';
}

inline std::vector<nlohmann::json> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open manifest " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!detail::trim(line).empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

/// Runs one experiment and records the outcome as a manifest record instead
/// of throwing.
inline ManifestRecord run_recorded(const ExperimentConfig& cfg, const PcaProblem* shared,
                                   const std::function<void(const std::string&)>& warn = {}) {
  ManifestRecord rec;
  rec.run_id = cfg.name;
  rec.config = cfg.to_map();
  try {
    const RunResult res = run_experiment(cfg, shared, warn);
    rec.csv = res.csv_path.filename().string();
  } catch (const EngineFault& e) {
    rec.ok = false;
    rec.error_kind = "engine";
    rec.error = e.what();
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error_kind = "config";
    rec.error = e.what();
  }
  return rec;
}

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"schedule", "beta", "topology", "seed"};
  return axes;
}

struct SweepResult {
  std::filesystem::path manifest;
  std::vector<ManifestRecord> records;
  std::size_t failures() const {
    return std::size_t(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
  }
};

/// Executes configs in parallel over `jobs` threads with one shared instance
/// per distinct instance configuration, then writes the manifest in input
/// order.
inline SweepResult run_configs(const std::vector<ExperimentConfig>& configs, const std::filesystem::path& out_dir,
                               int jobs, const std::function<void(const std::string&)>& warn = {}) {
  SweepResult result;
  result.manifest = out_dir / kManifestName;
  result.records.resize(configs.size());
  std::filesystem::create_directories(out_dir);

  std::optional<PcaProblem> shared;
  std::string shared_error;
  if (!configs.empty()) {
    try {
      configs.front().validate();
      shared.emplace(load_or_generate_instance(configs.front()));
    } catch (const std::exception& e) {
      shared_error = e.what();
    }
  }
  auto same_instance = [&](const ExperimentConfig& c) {
    const auto& b = configs.front();
    return c.agents == b.agents && c.rows == b.rows && c.dim == b.dim && c.rank == b.rank &&
           c.eigengap == b.eigengap && c.instance_seed == b.instance_seed && c.instance_cache == b.instance_cache;
  };

  std::mutex warn_mutex;
  auto locked_warn = [&](const std::string& w) {
    if (!warn) return;
    std::lock_guard<std::mutex> lock(warn_mutex);
    warn(w);
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < configs.size(); idx = next++) {
      const auto& c = configs[idx];
      if (same_instance(c) && !shared) {
        ManifestRecord rec;
        rec.run_id = c.name;
        rec.config = c.to_map();
        rec.ok = false;
        rec.error_kind = "config";
        rec.error = shared_error;
        result.records[idx] = std::move(rec);
        continue;
      }
      result.records[idx] = run_recorded(c, same_instance(c) ? &*shared : nullptr, locked_warn);
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, int(configs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  write_manifest(out_dir, result.records, /*append=*/false);
  return result;
}

inline std::string sanitize_id(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

/// Cross product of `base` with one axis. Run ids are
/// `<name>-<axis>-<index>-<value>`; all runs write into base.output.
inline SweepResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                             const std::vector<std::string>& values, int jobs,
                             const std::function<void(const std::string&)>& warn = {}) {
  const auto& axes = sweep_axes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    throw ConfigError("sweep axis '" + axis + "' not one of schedule|beta|topology|seed");
  }
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig c = base;
    c.set(axis, values[i]);
    c.name = base.name + "-" + axis + "-" + std::to_string(i) + "-" + sanitize_id(values[i]);
    configs.push_back(std::move(c));
  }
  return run_configs(configs, base.output, jobs, warn);
}

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig1", "fig2", "fig5"};
  return ids;
}

/// Built-in configurations for the convergence figures: N = 4 agents with
/// 2500 rows each, n = 8, r = 3, eigengap 0.8, ring graph, t = 1,
/// alpha = 1, beta = 0.1, 1000 iterations.
///   fig1: DRSGT with N_k = k + 1 against DRSGD (single samples, beta_k = 0.1 / sqrt(k + 1))
///   fig2: DRSGT with N_k = ceil(q^-k), q in {0.85, 0.9, 0.95}
///   fig5: DRSGT with N_k = 1, k + 1, ceil(0.9^-k)
inline std::vector<ExperimentConfig> figure_configs(const std::string& id, const std::string& output_dir) {
  ExperimentConfig base;
  base.output = output_dir;
  base.agents = 4;
  base.rows = 2500;
  base.dim = 8;
  base.rank = 3;
  base.eigengap = 0.8;
  base.topology = "ring";
  base.t = 1;
  base.alpha = 1.0;
  base.beta = 0.1;
  base.max_iters = 1000;

  std::vector<ExperimentConfig> out;
  auto add = [&](const std::string& name, Algorithm algo, SampleSchedule sched) {
    ExperimentConfig c = base;
    c.name = id + "-" + name;
    c.algorithm = algo;
    c.schedule = sched;
    out.push_back(std::move(c));
  };
  if (id == "fig1") {
    add("drsgt", Algorithm::kDrsgt, SampleSchedule::polynomial(1.0));
    add("drsgd", Algorithm::kDrsgd, SampleSchedule::constant(1));
  } else if (id == "fig2") {
    add("geometric-0.85", Algorithm::kDrsgt, SampleSchedule::geometric(0.85));
    add("geometric-0.9", Algorithm::kDrsgt, SampleSchedule::geometric(0.9));
    add("geometric-0.95", Algorithm::kDrsgt, SampleSchedule::geometric(0.95));
  } else if (id == "fig5") {
    add("constant-1", Algorithm::kDrsgt, SampleSchedule::constant(1));
    add("polynomial-1", Algorithm::kDrsgt, SampleSchedule::polynomial(1.0));
    add("geometric-0.9", Algorithm::kDrsgt, SampleSchedule::geometric(0.9));
  } else {
    std::string valid;
    for (const auto& f : figure_ids()) valid += (valid.empty() ? "" : ", ") + f;
    throw ConfigError("unknown figure id '" + id + "'; valid ids: " + valid);
  }
  return out;
}

}  // namespace drsgt
