#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "drsgt/engine.hpp"
#include "drsgt/pca.hpp"
#include "drsgt/stiefel.hpp"

namespace drsgt {

/// One CSV row. All four quality metrics are evaluated at the IAM X_hat of
/// the agents' iterates with exact gradients, so they never consume samples.
struct MetricsRow {
  std::uint64_t k = 0;
  double f_gap = 0.0;      // f(X_hat) - f*
  double grad_norm = 0.0;  // ||grad f(X_hat)||_F
  double consensus = 0.0;  // ||X - X_hat||_F over the stacked agents
  double ds = 0.0;         // min_Q ||X_hat Q - X*||_F
  std::uint64_t samples_cum = 0;
  std::uint64_t comm_rounds_cum = 0;
  std::uint64_t wall_ms = 0;

  // Sentinel for iterations where the IAM is undefined.
  bool degenerate() const noexcept { return std::isnan(grad_norm); }
};

inline MetricsRow compute_metrics(const PcaProblem& problem, std::span<const StiefelPoint> points,
                                  const Counters& counters, std::uint64_t wall_ms = 0) {
  MetricsRow row;
  row.k = counters.iteration;
  row.samples_cum = counters.samples;
  row.comm_rounds_cum = counters.comm_rounds;
  row.wall_ms = wall_ms;
  try {
    const StiefelPoint iam = induced_arithmetic_mean(points);
    row.f_gap = problem.objective(iam.matrix()) - problem.f_star();
    row.grad_norm = exact_riemannian_gradient(problem, iam).norm();
    row.consensus = std::sqrt(sum_squared_distance(points, iam.matrix()));
    row.ds = procrustes_distance(iam, problem.x_star());
  } catch (const DegenerateMeanError&) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    row.f_gap = row.grad_norm = row.consensus = row.ds = nan;
  }
  return row;
}

}  // namespace drsgt
