#pragma once

// Communication graphs and their doubly-stochastic mixing matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "drsgt/errors.hpp"
#include "drsgt/stiefel.hpp"

namespace drsgt {

using Edge = std::pair<int, int>;  // undirected, stored with first < second

namespace topology {
struct Ring {};
struct Complete {};
struct Star {};  // hub is agent 0
struct ErdosRenyi {
  double p{};
  std::uint64_t seed{};
};
struct Explicit {
  std::vector<Edge> edges;
};
}  // namespace topology

using TopologyKind = std::variant<topology::Ring, topology::Complete, topology::Star,
                                  topology::ErdosRenyi, topology::Explicit>;

inline constexpr int kMaxErdosRenyiAttempts = 1000;

class NetworkSpec {
 public:
  /// Builds Metropolis-Hastings weights w_ij = 1 / (1 + max(d_i, d_j)) on the
  /// given edge set. Throws TopologyError for self loops, out-of-range
  /// endpoints or a disconnected graph.
  NetworkSpec(int n_agents, std::vector<Edge> edges) : n_(n_agents) {
    if (n_agents < 1) throw TopologyError("network needs at least one agent");
    for (auto& e : edges) {
      if (e.first == e.second) throw TopologyError("self loop on agent " + std::to_string(e.first));
      if (e.first < 0 || e.second < 0 || e.first >= n_ || e.second >= n_) {
        throw TopologyError("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                            ") out of range for " + std::to_string(n_) + " agents");
      }
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    if (!connected(n_, edges_)) throw TopologyError("communication graph is not connected");

    std::vector<int> degree(static_cast<std::size_t>(n_), 0);
    for (const auto& [i, j] : edges_) {
      ++degree[std::size_t(i)];
      ++degree[std::size_t(j)];
    }
    mixing_ = Matrix::Zero(n_, n_);
    for (const auto& [i, j] : edges_) {
      const double w = 1.0 / (1.0 + std::max(degree[std::size_t(i)], degree[std::size_t(j)]));
      mixing_(i, j) = w;
      mixing_(j, i) = w;
    }
    for (int i = 0; i < n_; ++i) mixing_(i, i) = 1.0 - mixing_.row(i).sum();
  }

  int n_agents() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const Matrix& mixing() const noexcept { return mixing_; }

  /// W^t by repeated multiplication.
  Matrix mixing_power(int t) const {
    Matrix p = Matrix::Identity(n_, n_);
    for (int s = 0; s < t; ++s) p = p * mixing_;
    return p;
  }

  static bool connected(int n, const std::vector<Edge>& edges) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [i, j] : edges) {
      adj[std::size_t(i)].push_back(j);
      adj[std::size_t(j)].push_back(i);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[std::size_t(u)]) {
        if (!seen[std::size_t(v)]) {
          seen[std::size_t(v)] = 1;
          ++count;
          q.push(v);
        }
      }
    }
    return count == n;
  }

 private:
  int n_;
  std::vector<Edge> edges_;
  Matrix mixing_;
};

inline NetworkSpec build_topology(const TopologyKind& kind, int n_agents) {
  if (n_agents < 2) throw TopologyError("build_topology: need N >= 2 agents");
  std::vector<Edge> edges;
  struct Visitor {
    int n;
    std::vector<Edge>& edges;
    void operator()(const topology::Ring&) const {
      for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    }
    void operator()(const topology::Complete&) const {
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    }
    void operator()(const topology::Star&) const {
      for (int i = 1; i < n; ++i) edges.emplace_back(0, i);
    }
    void operator()(const topology::ErdosRenyi& er) const {
      if (!(er.p > 0.0 && er.p <= 1.0)) throw TopologyError("erdos_renyi: p must be in (0, 1]");
      std::mt19937_64 rng(er.seed);
      std::bernoulli_distribution coin(er.p);
      for (int attempt = 0; attempt < kMaxErdosRenyiAttempts; ++attempt) {
        edges.clear();
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
        if (NetworkSpec::connected(n, edges)) return;
      }
      throw TopologyError("erdos_renyi: no connected sample after " +
                          std::to_string(kMaxErdosRenyiAttempts) + " attempts");
    }
    void operator()(const topology::Explicit& ex) const { edges = ex.edges; }
  };
  std::visit(Visitor{n_agents, edges}, kind);
  return NetworkSpec(n_agents, std::move(edges));
}

struct SpectralDiagnostics {
  double sigma2{};  // ||W - 11^T / N||_2
  double l_t{};     // 1 - lambda_min(W^t)
  int t_min{};      // ceil(log_{sigma2}(1 / (2 sqrt N))), 1 when sigma2 == 0
  bool meets_bound(int t) const noexcept { return t >= t_min; }
};

inline SpectralDiagnostics spectral_diagnostics(const NetworkSpec& net, int t) {
  if (t < 1) throw ParameterError("spectral_diagnostics: t must be >= 1");
  const int n = net.n_agents();
  const Matrix centered = net.mixing() - Matrix::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Matrix> ec(centered, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> ew(net.mixing(), Eigen::EigenvaluesOnly);

  SpectralDiagnostics d;
  d.sigma2 = ec.eigenvalues().cwiseAbs().maxCoeff();
  if (d.sigma2 < 1e-12) d.sigma2 = 0.0;
  // W^t shares eigenvectors with W, so its eigenvalues are lambda^t.
  double lam_min = std::pow(ew.eigenvalues()(0), t);
  for (Eigen::Index k = 1; k < ew.eigenvalues().size(); ++k)
    lam_min = std::min(lam_min, std::pow(ew.eigenvalues()(k), t));
  d.l_t = 1.0 - lam_min;
  if (d.sigma2 == 0.0) {
    d.t_min = 1;
  } else {
    const double target = std::log(1.0 / (2.0 * std::sqrt(double(n)))) / std::log(d.sigma2);
    d.t_min = std::max(1, int(std::ceil(target - 1e-9)));
  }
  return d;
}

/// Per-agent sum_j (W^t)_{ij} V_j, applied as t rounds of one-hop averaging.
inline std::vector<Matrix> mix(const NetworkSpec& net, int t, std::span<const Matrix> values) {
  if (values.size() != std::size_t(net.n_agents())) {
    throw DimensionError("mix: expected " + std::to_string(net.n_agents()) + " values, got " +
                         std::to_string(values.size()));
  }
  if (t < 1) throw ParameterError("mix: t must be >= 1");
  const Matrix& w = net.mixing();
  std::vector<Matrix> cur(values.begin(), values.end());
  std::vector<Matrix> next(cur.size());
  for (int s = 0; s < t; ++s) {
    for (int i = 0; i < net.n_agents(); ++i) {
      next[std::size_t(i)] = w(i, i) * cur[std::size_t(i)];
    }
    for (const auto& [i, j] : net.edges()) {
      next[std::size_t(i)] += w(i, j) * cur[std::size_t(j)];
      next[std::size_t(j)] += w(j, i) * cur[std::size_t(i)];
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace drsgt
