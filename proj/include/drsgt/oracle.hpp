#pragma once

// Stochastic Riemannian gradient oracles.
//
// An oracle answers "give me F_i(X) averaged over n i.i.d. samples" for agent
// i. Each call takes the caller's generator so agents can own independent,
// reproducible streams.

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>

#include "drsgt/errors.hpp"
#include "drsgt/pca.hpp"
#include "drsgt/stiefel.hpp"

namespace drsgt {

using Rng = std::mt19937_64;

struct GradientSample {
  TangentVector value;
  std::uint64_t samples_used{};
};

template <class O>
concept StochasticGradientOracle = requires(const O& o, int agent, const StiefelPoint& x, std::uint64_t n, Rng& rng) {
  { o.sample(agent, x, n, rng) } -> std::same_as<GradientSample>;
  { o.n_agents() } -> std::convertible_to<int>;
};

/// Row-sampling estimator for the PCA objective. A uniformly drawn row a of
/// A_i gives the Euclidean sample -a a^T X, whose expectation is -C_i X.
/// Draws are with replacement. Batches larger than the agent's row count are
/// drawn as multinomial row counts, which has the same distribution as
/// drawing indices one at a time but costs O(m_i) instead of O(n).
class PcaRowSampler {
 public:
  enum class Mode {
    kWithReplacement,
    kEnumerateRows,  // test hook: every row exactly once, i.e. the exact gradient
  };

  explicit PcaRowSampler(const PcaProblem& problem, Mode mode = Mode::kWithReplacement)
      : problem_(&problem), mode_(mode) {}

  int n_agents() const noexcept { return problem_->n_agents(); }
  const PcaProblem& problem() const noexcept { return *problem_; }

  GradientSample sample(int agent, const StiefelPoint& x, std::uint64_t n_samples, Rng& rng) const {
    if (n_samples < 1) throw OracleError("PcaRowSampler: n_samples must be >= 1");
    const Matrix& a = problem_->data(agent);
    const Eigen::Index m = a.rows();
    if (m == 0) throw OracleError("PcaRowSampler: empty data matrix");
    Matrix acc = Matrix::Zero(x.n(), x.r());
    std::uint64_t used = n_samples;

    if (mode_ == Mode::kEnumerateRows) {
      for (Eigen::Index row = 0; row < m; ++row) {
        acc.noalias() += a.row(row).transpose() * (a.row(row) * x.matrix());
      }
      acc /= double(m);
      used = std::uint64_t(m);
    } else if (n_samples <= std::uint64_t(m)) {
      std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
      for (std::uint64_t s = 0; s < n_samples; ++s) {
        const Eigen::Index row = pick(rng);
        acc.noalias() += a.row(row).transpose() * (a.row(row) * x.matrix());
      }
      acc /= double(n_samples);
    } else {
      // Sequential conditional binomials give a multinomial(n, 1/m) draw.
      Vector weight(m);
      std::uint64_t left = n_samples;
      for (Eigen::Index row = 0; row < m; ++row) {
        std::uint64_t c = 0;
        if (row == m - 1) {
          c = left;
        } else if (left > 0) {
          std::binomial_distribution<std::uint64_t> bin(left, 1.0 / double(m - row));
          c = bin(rng);
        }
        left -= c;
        weight(row) = double(c) / double(n_samples);
      }
      const Matrix ax = a * x.matrix();
      acc = a.transpose() * (weight.asDiagonal() * ax);
    }

    TangentVector g = tangent_projection(x, -acc);
    assert(g.norm() <= problem_->sample_bound() * (1.0 + 1e-9));
    return {std::move(g), used};
  }

 private:
  const PcaProblem* problem_;
  Mode mode_;
};

/// Noise-free oracle: returns grad f_i(X) from the cached covariance. Reports
/// the requested batch size so sample accounting is oracle independent.
class PcaExactOracle {
 public:
  explicit PcaExactOracle(const PcaProblem& problem) : problem_(&problem) {}

  int n_agents() const noexcept { return problem_->n_agents(); }
  const PcaProblem& problem() const noexcept { return *problem_; }

  GradientSample sample(int agent, const StiefelPoint& x, std::uint64_t n_samples, Rng&) const {
    if (n_samples < 1) throw OracleError("PcaExactOracle: n_samples must be >= 1");
    return {exact_riemannian_gradient(*problem_, agent, x), n_samples};
  }

 private:
  const PcaProblem* problem_;
};

/// grad f_i(X) plus tangent Gaussian noise with E||G - grad f_i(X)||^2 = sigma^2
/// exactly. The ambient noise has i.i.d. entries with variance
/// sigma^2 / dim T_X, where dim T_X = n r - r (r + 1) / 2. A batch of n
/// samples averages to noise with variance sigma^2 / n, drawn directly.
class SyntheticNoiseOracle {
 public:
  SyntheticNoiseOracle(const PcaProblem& problem, double sigma) : problem_(&problem), sigma_(sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw OracleError("SyntheticNoiseOracle: sigma must be >= 0");
  }

  int n_agents() const noexcept { return problem_->n_agents(); }
  const PcaProblem& problem() const noexcept { return *problem_; }
  double sigma() const noexcept { return sigma_; }

  static double tangent_dimension(Eigen::Index n, Eigen::Index r) { return double(n * r) - double(r * (r + 1)) / 2.0; }

  GradientSample sample(int agent, const StiefelPoint& x, std::uint64_t n_samples, Rng& rng) const {
    if (n_samples < 1) throw OracleError("SyntheticNoiseOracle: n_samples must be >= 1");
    const double entry_sd = sigma_ / std::sqrt(tangent_dimension(x.n(), x.r()) * double(n_samples));
    std::normal_distribution<double> gauss(0.0, entry_sd);
    Matrix noise(x.n(), x.r());
    for (Eigen::Index j = 0; j < noise.cols(); ++j)
      for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = gauss(rng);
    Matrix g = problem_->euclidean_gradient(agent, x.matrix()) + noise;
    return {tangent_projection(x, g), n_samples};
  }

 private:
  const PcaProblem* problem_;
  double sigma_;
};

static_assert(StochasticGradientOracle<PcaRowSampler>);
static_assert(StochasticGradientOracle<PcaExactOracle>);
static_assert(StochasticGradientOracle<SyntheticNoiseOracle>);

/// Unbiased estimate of E||F_i(X) - E F_i(X)||_F^2 from repeated draws.
template <StochasticGradientOracle O>
double empirical_variance(const O& oracle, int agent, const StiefelPoint& x, std::uint64_t batch, int draws, Rng& rng) {
  Matrix mean = Matrix::Zero(x.n(), x.r());
  double sq = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Matrix g = oracle.sample(agent, x, batch, rng).value.matrix();
    mean += g;
    sq += g.squaredNorm();
  }
  mean /= double(draws);
  return (sq / double(draws) - mean.squaredNorm()) * double(draws) / double(draws - 1);
}

}  // namespace drsgt
