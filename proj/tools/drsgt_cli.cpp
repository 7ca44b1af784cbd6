// Command-line driver for the DRSGT experiment harness.
//
// Exit codes: 0 success, 2 configuration / input error, 3 engine fault.

#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "drsgt/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitEngine = 3;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

int exit_code_for(const drsgt::ManifestRecord& rec) {
  if (rec.ok) return kExitOk;
  return rec.error_kind == "engine" ? kExitEngine : kExitConfig;
}

drsgt::ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
  drsgt::ExperimentConfig cfg = drsgt::load_config(path);
  drsgt::apply_overrides(cfg, overrides);
  return cfg;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  const drsgt::ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  const drsgt::ManifestRecord rec = drsgt::run_recorded(cfg, nullptr, warn);
  drsgt::write_manifest(cfg.output, {rec}, /*append=*/true);
  if (!rec.ok) {
    std::cerr << "error: " << rec.error << '\n';
    return exit_code_for(rec);
  }
  const auto summary_path = std::filesystem::path(cfg.output) / (cfg.name + ".summary.json");
  std::ifstream js(summary_path);
  const auto summary = nlohmann::json::parse(js);
  std::cout << "wrote " << (std::filesystem::path(cfg.output) / rec.csv).string() << '\n';
  std::cout << "iterations=" << summary["iterations"] << " samples=" << summary["samples_cum"]
            << " comm_rounds=" << summary["comm_rounds_cum"] << " min_grad_norm_sq=" << summary["min_grad_norm_sq"];
  if (cfg.target_eps > 0.0) std::cout << " target_reached=" << summary["target_reached"];
  std::cout << '\n';
  return kExitOk;
}

int report_sweep(const drsgt::SweepResult& res) {
  for (const auto& r : res.records) {
    if (r.ok) {
      std::cout << r.run_id << ": ok\n";
    } else {
      std::cerr << r.run_id << ": " << r.error << '\n';
    }
  }
  std::cout << "manifest " << res.manifest.string() << " (" << res.records.size() << " runs, " << res.failures()
            << " failed)\n";
  return kExitOk;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_validate_graph(const std::string& kind, const std::string& arg, int agents, int t, double p,
                       std::uint64_t seed) {
  drsgt::TopologyKind topo;
  int n = agents;
  if (kind == "explicit") {
    if (arg.empty()) throw drsgt::ConfigError("validate-graph explicit: edge list file required");
    auto edges = drsgt::load_edge_list(arg);
    if (n <= 0) {
      for (const auto& [i, j] : edges) n = std::max({n, i + 1, j + 1});
    }
    topo = drsgt::topology::Explicit{std::move(edges)};
  } else {
    if (!arg.empty()) n = std::stoi(arg);
    if (kind == "ring") {
      topo = drsgt::topology::Ring{};
    } else if (kind == "complete") {
      topo = drsgt::topology::Complete{};
    } else if (kind == "star") {
      topo = drsgt::topology::Star{};
    } else if (kind == "erdos_renyi") {
      topo = drsgt::topology::ErdosRenyi{p, seed};
    } else {
      throw drsgt::ConfigError("unknown topology '" + kind + "' (ring|complete|star|erdos_renyi|explicit)");
    }
  }
  if (n <= 0) throw drsgt::ConfigError("validate-graph: number of agents required");
  const drsgt::NetworkSpec net = drsgt::build_topology(topo, n);
  const drsgt::SpectralDiagnostics d = drsgt::spectral_diagnostics(net, t);
  std::cout.precision(6);
  std::cout << "agents=" << n << " edges=" << net.edge_count() << '\n';
  std::cout << "sigma2=" << d.sigma2 << '\n';
  std::cout << "L_t=" << d.l_t << " (t=" << t << ")\n";
  std::cout << "t_min=" << d.t_min << '\n';
  if (d.meets_bound(t)) {
    std::cout << "ok: t meets theoretical bound\n";
  } else {
    std::cout << "warning: t below theoretical bound (t=" << t << " < t_min=" << d.t_min << ")\n";
  }
  return kExitOk;
}

bool is_instance_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[8] = {};
  return is.read(magic, sizeof magic) && std::memcmp(magic, drsgt::cache::kMagic, sizeof magic) == 0;
}

int cmd_inspect_instance(const std::string& path, const std::vector<std::string>& overrides,
                         const std::string& write_cache) {
  std::optional<drsgt::PcaProblem> problem;
  if (is_instance_cache(path)) {
    problem.emplace(drsgt::read_instance(path));
  } else {
    problem.emplace(drsgt::load_or_generate_instance(load_with_overrides(path, overrides)));
  }
  const auto& p = *problem;
  std::cout.precision(10);
  std::cout << "agents=" << p.n_agents() << " n=" << p.n() << " r=" << p.r() << '\n';
  std::cout << "rows_per_agent=";
  for (int i = 0; i < p.n_agents(); ++i) std::cout << (i ? "," : "") << p.data(i).rows();
  std::cout << '\n';
  std::cout << "f_star=" << p.f_star() << '\n';
  std::cout << "eigenvalues=";
  for (Eigen::Index j = 0; j < p.eigenvalues().size(); ++j) std::cout << (j ? "," : "") << p.eigenvalues()(j);
  std::cout << '\n';
  std::cout << "empirical_eigengap=" << p.eigenvalues()(p.r() - 1) - p.eigenvalues()(p.r()) << '\n';
  std::cout << "sample_bound_A=" << p.sample_bound() << '\n';
  std::cout << "riemannian_lipschitz_L_G=" << p.riemannian_lipschitz_bound() << '\n';
  std::cout << "smoothness_L_g=" << p.smoothness_bound() << '\n';
  const drsgt::PcaRowSampler sampler(p);
  double var = 0.0;
  for (int i = 0; i < p.n_agents(); ++i) {
    drsgt::Rng rng = drsgt::make_stream(0, 1'000'000 + std::uint64_t(i));
    var += drsgt::empirical_variance(sampler, i, p.x_star(), 1, 1000, rng);
  }
  std::cout << "sigma_sq_estimate_at_xstar=" << var / p.n_agents() << '\n';
  if (!write_cache.empty()) {
    drsgt::write_instance(p, write_cache);
    std::cout << "wrote " << write_cache << '\n';
  }
  return kExitOk;
}

int cmd_replicate_figure(const std::string& id, const std::string& out_dir, int jobs,
                         const std::vector<std::string>& overrides) {
  auto configs = drsgt::figure_configs(id, out_dir);
  for (auto& c : configs) drsgt::apply_overrides(c, overrides);
  return report_sweep(drsgt::run_configs(configs, out_dir, jobs, warn));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized Riemannian stochastic gradient tracking on the Stiefel manifold"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->allow_extras();
  run->footer("Any config key can be overridden with --key=value, e.g. --beta=0.1 --schedule=polynomial:1.\n"
              "--target-eps=EPS stops at the first k with grad_norm^2 <= EPS.");

  std::string axis;
  std::string values;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a one-axis sweep over a base config");
  sweep->add_option("config", config_path, "Base config file")->required();
  sweep->add_option("--axis", axis, "schedule|beta|topology|seed")->required();
  sweep->add_option("--values", values, "Comma-separated axis values (schedule values use ';' if they contain ',')");
  sweep->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sweep->allow_extras();

  std::string kind;
  std::string graph_arg;
  int agents = 0;
  int t = 1;
  double p = 0.5;
  std::uint64_t graph_seed = 0;
  auto* vg = app.add_subcommand("validate-graph", "Print sigma2, L_t and t_min of a topology");
  vg->add_option("kind", kind, "ring|complete|star|erdos_renyi|explicit")->required();
  vg->add_option("arg", graph_arg, "Number of agents, or edge list file for explicit");
  vg->add_option("--agents", agents, "Number of agents (explicit graphs default to max id + 1)");
  vg->add_option("--t", t, "Communication steps per mixing")->check(CLI::PositiveNumber);
  vg->add_option("--p", p, "Edge probability for erdos_renyi");
  vg->add_option("--seed", graph_seed, "Seed for erdos_renyi");

  std::string inspect_path;
  std::string write_cache;
  auto* inspect = app.add_subcommand("inspect-instance", "Describe a PCA instance (config file or cache file)");
  inspect->add_option("path", inspect_path, "Config file or binary instance cache")->required();
  inspect->add_option("--write-cache", write_cache, "Write the instance to this cache file");
  inspect->allow_extras();

  std::string figure;
  std::string out_dir = drsgt::default_output_dir();
  auto* rep = app.add_subcommand("replicate-figure", "Run the built-in configurations of a convergence figure");
  rep->add_option("figure", figure, "fig1|fig2|fig5")->required();
  rep->add_option("--out", out_dir, "Output directory (default $DRSGT_OUTPUT_DIR or ./out)");
  rep->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  rep->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, run->remaining());
    if (*sweep) {
      drsgt::ExperimentConfig base = load_with_overrides(config_path, sweep->remaining());
      const char sep = values.find(';') != std::string::npos ? ';' : ',';
      const std::vector<std::string> vals = split(values, sep);
      return report_sweep(drsgt::run_sweep(base, axis, vals, jobs, warn));
    }
    if (*vg) return cmd_validate_graph(kind, graph_arg, agents, t, p, graph_seed);
    if (*inspect) return cmd_inspect_instance(inspect_path, inspect->remaining(), write_cache);
    if (*rep) return cmd_replicate_figure(figure, out_dir, jobs, rep->remaining());
  } catch (const drsgt::EngineFault& e) {
    std::cerr << "engine fault: " << e.what() << '\n';
    return kExitEngine;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
