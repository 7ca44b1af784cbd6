#pragma once

// Synchronous multi-agent engine for decentralized Riemannian stochastic
// gradient tracking (DRSGT) and the DRSGD baseline.
//
// Per DRSGT iteration k, every agent i
//   v_i      = P_{X_i}(Y_i)
//   X_i^+    = R_{X_i}( alpha P_{X_i}(sum_j (W^t)_ij X_j) - beta v_i )
//   F_i^+    = batch-average of N_{k+1} gradient samples at X_i^+
//   Y_i^+    = sum_j (W^t)_ij Y_j + F_i^+ - F_i
// which keeps mean(Y) == mean(F) exactly (the tracking identity).
//
// The gradient held for X_{i,k} is always averaged over N_k samples, so after
// k iterations the engine has consumed N * (N_0 + ... + N_k) samples.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <string>
#include <vector>

#include "drsgt/errors.hpp"
#include "drsgt/network.hpp"
#include "drsgt/oracle.hpp"
#include "drsgt/schedule.hpp"
#include "drsgt/stiefel.hpp"

namespace drsgt {

enum class Algorithm { kDrsgt, kDrsgd };

inline const char* to_string(Algorithm a) { return a == Algorithm::kDrsgt ? "drsgt" : "drsgd"; }

struct AlgoConfig {
  Algorithm algorithm = Algorithm::kDrsgt;
  double alpha = 1.0;       // consensus step
  double beta = 0.1;        // DRSGT gradient step; DRSGD initial step beta_0
  double beta_decay = 0.5;  // DRSGD: beta_k = beta_0 / (k + 1)^beta_decay
  int t = 1;                // W applications per mixed quantity
  SampleSchedule schedule;
  std::uint64_t seed = 0;
  int audit_every = 50;
  bool independent_init = false;
  std::optional<Matrix> x0;  // common starting point; random when unset
  double tracking_tol = 1e-10;
};

struct Counters {
  std::uint64_t iteration = 0;
  std::uint64_t samples = 0;      // stochastic gradient samples, all agents
  std::uint64_t comm_rounds = 0;  // edge exchanges: |E| per W application per mixed quantity
};

/// Numerical failure inside the engine. Carries the iterate and tracker
/// snapshot at the failing iteration.
class EngineFault : public Error {
 public:
  EngineFault(const std::string& what, std::uint64_t iteration, std::vector<Matrix> xs, std::vector<Matrix> ys)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration),
        xs_(std::move(xs)),
        ys_(std::move(ys)) {}

  std::uint64_t iteration() const noexcept { return iteration_; }
  const std::vector<Matrix>& points() const noexcept { return xs_; }
  const std::vector<Matrix>& trackers() const noexcept { return ys_; }

 private:
  std::uint64_t iteration_;
  std::vector<Matrix> xs_;
  std::vector<Matrix> ys_;
};

/// Seeds for the init stream (stream 0) and agent i (stream i + 1).
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream), std::uint32_t(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

template <StochasticGradientOracle Oracle>
class Engine {
 public:
  /// Draws X_0 (common or per-agent uniform on St(n, r)) and, for DRSGT,
  /// Y_{i,0} = F_i(X_{i,0}) with N_0 samples.
  Engine(const Oracle& oracle, const NetworkSpec& net, AlgoConfig cfg, Eigen::Index n, Eigen::Index r)
      : oracle_(&oracle), net_(&net), cfg_(std::move(cfg)) {
    if (oracle.n_agents() != net.n_agents()) {
      throw DimensionError("Engine: oracle has " + std::to_string(oracle.n_agents()) + " agents, network has " +
                           std::to_string(net.n_agents()));
    }
    if (cfg_.t < 1) throw ParameterError("Engine: t must be >= 1");
    if (!(cfg_.alpha > 0.0)) throw ParameterError("Engine: alpha must be > 0");
    if (!(cfg_.beta > 0.0)) throw ParameterError("Engine: beta must be > 0");
    if (cfg_.audit_every < 1) throw ParameterError("Engine: audit_every must be >= 1");
    if (cfg_.alpha > 1.0) warnings_.push_back("alpha > 1 exceeds the step-size range covered by the convergence theory");
    const auto diag = spectral_diagnostics(net, cfg_.t);
    if (!diag.meets_bound(cfg_.t)) {
      std::ostringstream os;
      os << "t = " << cfg_.t << " below theoretical bound t_min = " << diag.t_min;
      warnings_.push_back(os.str());
    }

    const auto agents = std::size_t(net.n_agents());
    Rng init = make_stream(cfg_.seed, 0);
    for (std::size_t i = 0; i < agents; ++i) rngs_.push_back(make_stream(cfg_.seed, i + 1));
    if (cfg_.x0) {
      if (cfg_.x0->rows() != n || cfg_.x0->cols() != r) throw DimensionError("Engine: x0 has the wrong shape");
      xs_.assign(agents, StiefelPoint(*cfg_.x0));
    } else if (cfg_.independent_init) {
      for (std::size_t i = 0; i < agents; ++i) xs_.push_back(random_stiefel_point(n, r, init));
      warnings_.push_back("independent initialization may start outside the local convergence region");
    } else {
      const StiefelPoint x0 = random_stiefel_point(n, r, init);
      xs_.assign(agents, x0);
    }

    if (cfg_.algorithm == Algorithm::kDrsgt) {
      const std::uint64_t n0 = cfg_.schedule.size(0);
      for (std::size_t i = 0; i < agents; ++i) {
        GradientSample s = oracle.sample(int(i), xs_[i], n0, rngs_[i]);
        counters_.samples = saturating_add(counters_.samples, s.samples_used);
        ys_.push_back(s.value.matrix());
        grads_.push_back(std::move(s.value));
      }
    }
  }

  void step() {
    if (cfg_.algorithm == Algorithm::kDrsgt) {
      drsgt_step();
    } else {
      drsgd_step();
    }
    ++counters_.iteration;
    if (counters_.iteration % std::uint64_t(cfg_.audit_every) == 0) audit();
  }

  const std::vector<StiefelPoint>& points() const noexcept { return xs_; }
  /// Trackers Y_i (DRSGT only; empty for DRSGD).
  const std::vector<Matrix>& trackers() const noexcept { return ys_; }
  /// F_i(X_{i,k}) (DRSGT only).
  const std::vector<TangentVector>& gradients() const noexcept { return grads_; }
  const Counters& counters() const noexcept { return counters_; }
  const AlgoConfig& config() const noexcept { return cfg_; }
  const NetworkSpec& network() const noexcept { return *net_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// ||mean(Y) - mean(F)||_F; zero up to rounding for DRSGT.
  double tracking_residual() const {
    if (ys_.empty()) return 0.0;
    Matrix diff = Matrix::Zero(ys_.front().rows(), ys_.front().cols());
    for (std::size_t i = 0; i < ys_.size(); ++i) diff += ys_[i] - grads_[i].matrix();
    return diff.norm() / double(ys_.size());
  }

  /// Audit every iterate's orthonormality; throws EngineFault on drift.
  void audit() const {
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      const double err = xs_[i].orthonormality_error();
      if (!(err <= kOrthonormalityTol)) {
        std::ostringstream os;
        os << "orthonormality drift " << err << " at agent " << i;
        fault(os.str());
      }
    }
  }

  RegionReport region(double delta1, double delta2) const { return region_membership(xs_, delta1, delta2); }

 private:
  [[noreturn]] void fault(const std::string& what) const {
    std::vector<Matrix> xs;
    for (const auto& x : xs_) xs.push_back(x.matrix());
    throw EngineFault(what, counters_.iteration, std::move(xs), ys_);
  }

  std::vector<Matrix> point_matrices() const {
    std::vector<Matrix> out;
    out.reserve(xs_.size());
    for (const auto& x : xs_) out.push_back(x.matrix());
    return out;
  }

  void drsgt_step() {
    const std::size_t agents = xs_.size();
    const std::uint64_t k = counters_.iteration;
    const std::vector<Matrix> mixed_x = mix(*net_, cfg_.t, point_matrices());

    std::vector<StiefelPoint> next_x;
    next_x.reserve(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      const TangentVector v = tangent_projection(xs_[i], ys_[i]);
      const TangentVector consensus = tangent_projection(xs_[i], mixed_x[i]);
      const TangentVector dir =
          TangentVector::unchecked(xs_[i], cfg_.alpha * consensus.matrix() - cfg_.beta * v.matrix());
      if (!dir.matrix().allFinite()) fault("non-finite step direction at agent " + std::to_string(i));
      next_x.push_back(polar_retraction(xs_[i], dir));
    }

    const std::uint64_t batch = cfg_.schedule.size(k + 1);
    std::vector<TangentVector> next_grads;
    next_grads.reserve(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      GradientSample s = oracle_->sample(int(i), next_x[i], batch, rngs_[i]);
      counters_.samples = saturating_add(counters_.samples, s.samples_used);
      next_grads.push_back(std::move(s.value));
    }

    std::vector<Matrix> next_y = mix(*net_, cfg_.t, ys_);
    for (std::size_t i = 0; i < agents; ++i) next_y[i] += next_grads[i].matrix() - grads_[i].matrix();

    xs_ = std::move(next_x);
    ys_ = std::move(next_y);
    grads_ = std::move(next_grads);
    counters_.comm_rounds += 2 * std::uint64_t(cfg_.t) * net_->edge_count();

    const double res = tracking_residual();
    if (!(res <= cfg_.tracking_tol)) {
      std::ostringstream os;
      os << "tracking identity violated: ||mean(Y) - mean(F)||_F = " << res;
      ++counters_.iteration;
      fault(os.str());
    }
  }

  void drsgd_step() {
    const std::size_t agents = xs_.size();
    const std::uint64_t k = counters_.iteration;
    const double beta_k = cfg_.beta / std::pow(double(k) + 1.0, cfg_.beta_decay);
    const std::uint64_t batch = cfg_.schedule.size(k);
    const std::vector<Matrix> mixed_x = mix(*net_, cfg_.t, point_matrices());

    std::vector<StiefelPoint> next_x;
    next_x.reserve(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      GradientSample s = oracle_->sample(int(i), xs_[i], batch, rngs_[i]);
      counters_.samples = saturating_add(counters_.samples, s.samples_used);
      const TangentVector consensus = tangent_projection(xs_[i], mixed_x[i]);
      const TangentVector dir =
          TangentVector::unchecked(xs_[i], cfg_.alpha * consensus.matrix() - beta_k * s.value.matrix());
      if (!dir.matrix().allFinite()) fault("non-finite step direction at agent " + std::to_string(i));
      next_x.push_back(polar_retraction(xs_[i], dir));
    }
    xs_ = std::move(next_x);
    counters_.comm_rounds += std::uint64_t(cfg_.t) * net_->edge_count();
  }

  const Oracle* oracle_;
  const NetworkSpec* net_;
  AlgoConfig cfg_;
  std::vector<Rng> rngs_;
  std::vector<StiefelPoint> xs_;
  std::vector<Matrix> ys_;
  std::vector<TangentVector> grads_;
  Counters counters_;
  std::vector<std::string> warnings_;
};

enum class SinkAction { kContinue, kStop };

struct RunSummary {
  Counters counters;
  bool stopped_early = false;
};

/// Calls sink(engine) for the initial state and after every iteration. The
/// sink may stop the run early by returning SinkAction::kStop.
template <class E, class Sink>
RunSummary run(E& engine, std::uint64_t max_iters, Sink&& sink) {
  RunSummary summary;
  if (sink(std::as_const(engine)) == SinkAction::kStop) {
    summary.stopped_early = true;
  } else {
    for (std::uint64_t k = 0; k < max_iters; ++k) {
      engine.step();
      if (sink(std::as_const(engine)) == SinkAction::kStop) {
        summary.stopped_early = true;
        break;
      }
    }
  }
  summary.counters = engine.counters();
  return summary;
}

}  // namespace drsgt
