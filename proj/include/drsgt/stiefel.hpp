#pragma once

// Stiefel manifold St(n, r) = { X in R^{n x r} : X^T X = I_r } and the
// primitives the gradient-tracking engine is built from: tangent projection,
// polar retraction, induced arithmetic mean (IAM) and distance measures.
//
// Everything here is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "drsgt/errors.hpp"

namespace drsgt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Unconstrained n x r element of the ambient space (trackers, Euclidean
// gradients, Euclidean means).
using AmbientMatrix = Matrix;

inline constexpr double kOrthonormalityTol = 1e-10;
inline constexpr double kTangencyTol = 1e-10;
inline constexpr double kRankTol = 1e-12;

namespace detail {

inline std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_of(a) + " vs " + shape_of(b));
  }
}

}  // namespace detail

/// ||X^T X - I||_F
inline double orthonormality_error(const Matrix& x) {
  const auto r = x.cols();
  return (x.transpose() * x - Matrix::Identity(r, r)).norm();
}

/// A point on St(n, r). The checked constructor validates orthonormality;
/// `unchecked` skips it for the simulator inner loop, which audits
/// separately.
class StiefelPoint {
 public:
  explicit StiefelPoint(Matrix data, double tol = kOrthonormalityTol)
      : data_(std::move(data)) {
    if (data_.rows() == 0 || data_.cols() == 0 || data_.cols() > data_.rows()) {
      throw DimensionError("StiefelPoint: need 0 < r <= n, got " +
                           detail::shape_of(data_));
    }
    const double err = drsgt::orthonormality_error(data_);
    if (!(err <= tol)) {
      std::ostringstream os;
      os << "StiefelPoint: ||X^T X - I||_F = " << err << " exceeds " << tol;
      throw ContractError(os.str());
    }
  }

  static StiefelPoint unchecked(Matrix data) {
    return StiefelPoint(std::move(data), Unchecked{});
  }

  const Matrix& matrix() const noexcept { return data_; }
  Eigen::Index n() const noexcept { return data_.rows(); }
  Eigen::Index r() const noexcept { return data_.cols(); }
  double orthonormality_error() const { return drsgt::orthonormality_error(data_); }

 private:
  struct Unchecked {};
  StiefelPoint(Matrix data, Unchecked) : data_(std::move(data)) {}

  Matrix data_;
};

/// ||X^T u + u^T X||_F, zero exactly on T_X St(n, r).
inline double tangency_error(const StiefelPoint& base, const Matrix& u) {
  const Matrix xtu = base.matrix().transpose() * u;
  return (xtu + xtu.transpose()).norm();
}

/// Element of T_X St(n, r) together with its base point X.
class TangentVector {
 public:
  // The tolerance scales with max(1, ||u||_F) so that large trackers projected
  // in floating point are not rejected for relative rounding.
  TangentVector(StiefelPoint base, Matrix data, double tol = kTangencyTol)
      : base_(std::move(base)), data_(std::move(data)) {
    detail::require_same_shape(base_.matrix(), data_, "TangentVector");
    const double err = tangency_error(base_, data_);
    if (!(err <= tol * std::max(1.0, data_.norm()))) {
      std::ostringstream os;
      os << "TangentVector: ||X^T u + u^T X||_F = " << err << " exceeds " << tol;
      throw ContractError(os.str());
    }
  }

  static TangentVector unchecked(StiefelPoint base, Matrix data) {
    return TangentVector(std::move(base), std::move(data), Unchecked{});
  }

  static TangentVector zero(const StiefelPoint& base) {
    return unchecked(base, Matrix::Zero(base.n(), base.r()));
  }

  const Matrix& matrix() const noexcept { return data_; }
  const StiefelPoint& base() const noexcept { return base_; }
  double norm() const { return data_.norm(); }

 private:
  struct Unchecked {};
  TangentVector(StiefelPoint base, Matrix data, Unchecked)
      : base_(std::move(base)), data_(std::move(data)) {}

  StiefelPoint base_;
  Matrix data_;
};

/// P_X(Y) = Y - X sym(X^T Y), the orthogonal projection onto T_X St(n, r).
inline TangentVector tangent_projection(const StiefelPoint& x, const Matrix& y) {
  detail::require_same_shape(x.matrix(), y, "tangent_projection");
  const Matrix xty = x.matrix().transpose() * y;
  Matrix p = y - 0.5 * x.matrix() * (xty + xty.transpose());
  return TangentVector::unchecked(x, std::move(p));
}

struct PolarFactor {
  Matrix factor;       // U V^T
  double sigma_min{};  // smallest singular value of the input
};

/// Polar factor of a full-column-rank n x r matrix via thin SVD.
inline PolarFactor polar_factor(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PolarFactor out;
  out.factor = svd.matrixU() * svd.matrixV().transpose();
  out.sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
  return out;
}

namespace detail {

inline void require_base(const StiefelPoint& x, const TangentVector& v) {
  detail::require_same_shape(x.matrix(), v.matrix(), "polar_retraction");
  if ((v.base().matrix() - x.matrix()).norm() > 1e-14 * std::sqrt(double(x.r()))) {
    throw ContractError("polar_retraction: tangent vector based at a different point");
  }
}

}  // namespace detail

/// R_X(v) = (X + v)(I + v^T v)^{-1/2}, evaluated as the polar factor of X + v.
/// For tangent v, (X + v)^T (X + v) = I + v^T v, so the two agree.
inline StiefelPoint polar_retraction(const StiefelPoint& x, const TangentVector& v) {
  detail::require_base(x, v);
  return StiefelPoint::unchecked(polar_factor(x.matrix() + v.matrix()).factor);
}

/// Same map through the (I + v^T v)^{-1/2} closed form. Kept for
/// cross-checking the SVD route.
inline StiefelPoint polar_retraction_closed_form(const StiefelPoint& x,
                                                 const TangentVector& v) {
  detail::require_base(x, v);
  const auto r = x.r();
  const Matrix gram = Matrix::Identity(r, r) + v.matrix().transpose() * v.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Matrix inv_sqrt = eig.eigenvectors() *
                          eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();
  return StiefelPoint::unchecked((x.matrix() + v.matrix()) * inv_sqrt);
}

/// Uniformly distributed point on St(n, r): polar factor of a Gaussian matrix.
template <class Rng>
StiefelPoint random_stiefel_point(Eigen::Index n, Eigen::Index r, Rng& rng) {
  if (r <= 0 || r > n) throw DimensionError("random_stiefel_point: need 0 < r <= n");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = gauss(rng);
  return StiefelPoint::unchecked(polar_factor(g).factor);
}

/// Random tangent vector at x with Frobenius norm `norm`.
template <class Rng>
TangentVector random_tangent(const StiefelPoint& x, double norm, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(x.n(), x.r());
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = gauss(rng);
  TangentVector p = tangent_projection(x, g);
  const double s = p.norm();
  return TangentVector::unchecked(x, s > 0 ? Matrix(p.matrix() * (norm / s)) : p.matrix());
}

inline Matrix euclidean_mean(std::span<const StiefelPoint> points) {
  if (points.empty()) throw DimensionError("euclidean_mean: empty point list");
  Matrix sum = Matrix::Zero(points.front().n(), points.front().r());
  for (const auto& p : points) {
    detail::require_same_shape(sum, p.matrix(), "euclidean_mean");
    sum += p.matrix();
  }
  return sum / double(points.size());
}

/// IAM: argmin_{Y in St} sum_i ||Y - X_i||_F^2 = polar factor of the
/// Euclidean mean. Throws DegenerateMeanError when sigma_r(mean) < rank_tol.
inline StiefelPoint induced_arithmetic_mean(std::span<const StiefelPoint> points,
                                            double rank_tol = kRankTol) {
  const Matrix mean = euclidean_mean(points);
  PolarFactor pf = polar_factor(mean);
  if (!(pf.sigma_min >= rank_tol)) {
    std::ostringstream os;
    os << "induced_arithmetic_mean: sigma_r of Euclidean mean is " << pf.sigma_min
       << " (< " << rank_tol << "), IAM not unique";
    throw DegenerateMeanError(os.str());
  }
  return StiefelPoint::unchecked(std::move(pf.factor));
}

/// sum_i ||X_i - Y||_F^2
inline double sum_squared_distance(std::span<const StiefelPoint> points, const Matrix& y) {
  double acc = 0.0;
  for (const auto& p : points) acc += (p.matrix() - y).squaredNorm();
  return acc;
}

/// ||X - X_hat||_F^2 = sum_i ||X_i - X_hat||_F^2, with X_hat the IAM.
inline double consensus_error(std::span<const StiefelPoint> points) {
  const StiefelPoint iam = induced_arithmetic_mean(points);
  return sum_squared_distance(points, iam.matrix());
}

/// d_s(X, X*) = min_{Q orthogonal} ||X Q - X*||_F. The minimiser is the polar
/// factor of X^T X*.
inline double procrustes_distance(const StiefelPoint& x, const StiefelPoint& xstar) {
  detail::require_same_shape(x.matrix(), xstar.matrix(), "procrustes_distance");
  const Matrix q = polar_factor(x.matrix().transpose() * xstar.matrix()).factor;
  return (x.matrix() * q - xstar.matrix()).norm();
}

struct RegionReport {
  double consensus_sq{};   // ||X - X_hat||_F^2
  double max_deviation{};  // max_i ||X_i - X_hat||_F
  bool in_s1{};            // consensus_sq <= N delta1^2
  bool in_s2{};            // max_deviation <= delta2
  bool in_region() const noexcept { return in_s1 && in_s2; }
};

/// Membership in the local region S = S1 ∩ S2 used by the convergence
/// analysis. Requires delta1 <= delta2 / (5 sqrt(r)) and delta2 <= 1/6.
inline RegionReport region_membership(std::span<const StiefelPoint> points,
                                      double delta1, double delta2) {
  if (points.empty()) throw DimensionError("region_membership: empty point list");
  const double r = double(points.front().r());
  // Small slack so that delta1 = delta2 / (5 sqrt r) computed in floating
  // point is accepted.
  constexpr double slack = 1e-12;
  if (!(delta1 > 0.0) || !(delta2 > 0.0) || delta2 > 1.0 / 6.0 + slack ||
      delta1 > delta2 / (5.0 * std::sqrt(r)) + slack) {
    std::ostringstream os;
    os << "region_membership: need 0 < delta1 <= delta2/(5 sqrt r) and 0 < delta2 <= 1/6, got delta1="
       << delta1 << " delta2=" << delta2;
    throw ParameterError(os.str());
  }
  const StiefelPoint iam = induced_arithmetic_mean(points);
  RegionReport rep;
  for (const auto& p : points) {
    const double d2 = (p.matrix() - iam.matrix()).squaredNorm();
    rep.consensus_sq += d2;
    rep.max_deviation = std::max(rep.max_deviation, std::sqrt(d2));
  }
  rep.in_s1 = rep.consensus_sq <= double(points.size()) * delta1 * delta1;
  rep.in_s2 = rep.max_deviation <= delta2;
  return rep;
}

}  // namespace drsgt
