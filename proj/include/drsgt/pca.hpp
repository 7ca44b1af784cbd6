#pragma once

// Decentralized PCA test problem
//
//   min_{X in St(n,r)}  f(X) = (1/N) sum_i f_i(X),   f_i(X) = -1/2 tr(X^T C_i X)
//
// with C_i = A_i^T A_i / m_i the (second-moment) covariance of agent i's rows.
// Normalizing by m_i keeps gradients O(1) regardless of how many rows an
// agent holds, so the same step sizes work across data sizes.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drsgt/errors.hpp"
#include "drsgt/stiefel.hpp"

namespace drsgt {

class PcaProblem {
 public:
  PcaProblem(std::vector<Matrix> data, int r, double eigengap = 0.0, std::uint64_t seed = 0)
      : data_(std::move(data)), r_(r), eigengap_(eigengap), seed_(seed) {
    if (data_.empty()) throw OracleError("PcaProblem: no agents");
    n_ = int(data_.front().cols());
    if (r_ < 1 || r_ > n_) throw DimensionError("PcaProblem: need 1 <= r <= n");
    global_cov_ = Matrix::Zero(n_, n_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const Matrix& a = data_[i];
      if (a.rows() == 0) throw OracleError("PcaProblem: agent " + std::to_string(i) + " has an empty data matrix");
      if (a.cols() != n_) throw DimensionError("PcaProblem: agents disagree on n");
      Matrix c = (a.transpose() * a) / double(a.rows());
      c = 0.5 * (c + c.transpose());
      global_cov_ += c;
      cov_.push_back(std::move(c));
      sample_bound_ = std::max(sample_bound_, a.rowwise().squaredNorm().maxCoeff());
    }
    global_cov_ /= double(data_.size());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(global_cov_);
    // Eigen sorts ascending; take the top r.
    eigenvalues_ = eig.eigenvalues().reverse();
    Matrix top = eig.eigenvectors().rightCols(r_).rowwise().reverse();
    x_star_ = StiefelPoint::unchecked(polar_factor(top).factor);
    f_star_ = -0.5 * eigenvalues_.head(r_).sum();

    for (const auto& c : cov_) {
      Eigen::SelfAdjointEigenSolver<Matrix> ec(c, Eigen::EigenvaluesOnly);
      max_local_norm_ = std::max(max_local_norm_, ec.eigenvalues().cwiseAbs().maxCoeff());
    }
  }

  int n_agents() const noexcept { return int(data_.size()); }
  int n() const noexcept { return n_; }
  int r() const noexcept { return r_; }
  double eigengap() const noexcept { return eigengap_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const Matrix& data(int agent) const { return data_.at(std::size_t(agent)); }
  const Matrix& covariance(int agent) const { return cov_.at(std::size_t(agent)); }
  const Matrix& global_covariance() const noexcept { return global_cov_; }

  /// Eigenvalues of the global covariance, descending.
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  const StiefelPoint& x_star() const noexcept { return *x_star_; }
  double f_star() const noexcept { return f_star_; }

  double local_objective(int agent, const Matrix& x) const {
    return -0.5 * (x.transpose() * covariance(agent) * x).trace();
  }
  double objective(const Matrix& x) const { return -0.5 * (x.transpose() * global_cov_ * x).trace(); }

  Matrix euclidean_gradient(int agent, const Matrix& x) const { return -covariance(agent) * x; }
  Matrix euclidean_gradient(const Matrix& x) const { return -global_cov_ * x; }

  /// Upper bound on ||G_i(X, xi)||_F for any single-row sample: max ||a||^2.
  double sample_bound() const noexcept { return sample_bound_; }
  /// Lipschitz bound of X -> grad f_i(X) on St(n,r): 4 max_i ||C_i||_2.
  double riemannian_lipschitz_bound() const noexcept { return 4.0 * max_local_norm_; }
  /// Constant L_g with |f(Y) - f(X) - <grad f(X), Y - X>| <= L_g/2 ||Y - X||^2
  /// for X, Y on St(n,r): 2 ||C||_2.
  double smoothness_bound() const { return 2.0 * eigenvalues_.cwiseAbs().maxCoeff(); }

 private:
  std::vector<Matrix> data_;
  std::vector<Matrix> cov_;
  Matrix global_cov_;
  int n_{};
  int r_{};
  double eigengap_{};
  std::uint64_t seed_{};
  Vector eigenvalues_;
  std::optional<StiefelPoint> x_star_;
  double f_star_{};
  double sample_bound_{};
  double max_local_norm_{};
};

/// grad f_i(X) = P_X(-C_i X)
inline TangentVector exact_riemannian_gradient(const PcaProblem& p, int agent, const StiefelPoint& x) {
  return tangent_projection(x, p.euclidean_gradient(agent, x.matrix()));
}

/// grad f(X): averages the agents' Euclidean gradients, then projects.
inline TangentVector exact_riemannian_gradient(const PcaProblem& p, const StiefelPoint& x) {
  return tangent_projection(x, p.euclidean_gradient(x.matrix()));
}

/// Rows are drawn from N(0, diag(lambda)) with lambda_j = 1 for j <= r and
/// 1 - eigengap beyond, then dealt to agents in contiguous blocks of m rows.
inline PcaProblem generate_pca_instance(int n_agents, int m_per_agent, int n, int r, double eigengap,
                                        std::uint64_t seed) {
  if (n_agents < 1 || m_per_agent < 1 || n < 1) throw ParameterError("generate_pca_instance: sizes must be positive");
  if (r < 1 || r >= n) throw ParameterError("generate_pca_instance: need 1 <= r < n");
  if (!(eigengap > 0.0 && eigengap <= 1.0)) throw ParameterError("generate_pca_instance: eigengap must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector scale(n);
  for (int j = 0; j < n; ++j) scale(j) = j < r ? 1.0 : std::sqrt(1.0 - eigengap);
  std::vector<Matrix> data;
  data.reserve(std::size_t(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    Matrix a(m_per_agent, n);
    for (int row = 0; row < m_per_agent; ++row)
      for (int j = 0; j < n; ++j) a(row, j) = scale(j) * gauss(rng);
    data.push_back(std::move(a));
  }
  return PcaProblem(std::move(data), r, eigengap, seed);
}

// Binary instance cache, little-endian:
//   char[8]  magic "DRSGTPCA"
//   u32      version (1)
//   u32      N, n, r
//   f64      eigengap
//   u64      seed
//   u64[N]   m_i
//   f64[...] each agent's m_i x n rows, row-major, agents in order
namespace cache {

inline constexpr char kMagic[8] = {'D', 'R', 'S', 'G', 'T', 'P', 'C', 'A'};
inline constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "instance cache assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("instance cache " + path + ": truncated");
  return v;
}

}  // namespace cache

inline void write_instance(const PcaProblem& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(cache::kMagic, sizeof cache::kMagic);
  cache::put<std::uint32_t>(os, cache::kVersion);
  cache::put<std::uint32_t>(os, std::uint32_t(p.n_agents()));
  cache::put<std::uint32_t>(os, std::uint32_t(p.n()));
  cache::put<std::uint32_t>(os, std::uint32_t(p.r()));
  cache::put<double>(os, p.eigengap());
  cache::put<std::uint64_t>(os, p.seed());
  for (int i = 0; i < p.n_agents(); ++i) cache::put<std::uint64_t>(os, std::uint64_t(p.data(i).rows()));
  for (int i = 0; i < p.n_agents(); ++i) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = p.data(i);
    os.write(reinterpret_cast<const char*>(rows.data()), std::streamsize(rows.size() * sizeof(double)));
  }
  if (!os) throw Error("write failed for " + path);
}

inline PcaProblem read_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open instance cache " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, cache::kMagic, sizeof magic) != 0) {
    throw Error("instance cache " + path + ": bad magic");
  }
  const auto version = cache::get<std::uint32_t>(is, path);
  if (version != cache::kVersion) throw Error("instance cache " + path + ": unsupported version " + std::to_string(version));
  const auto n_agents = cache::get<std::uint32_t>(is, path);
  const auto n = cache::get<std::uint32_t>(is, path);
  const auto r = cache::get<std::uint32_t>(is, path);
  const auto gap = cache::get<double>(is, path);
  const auto seed = cache::get<std::uint64_t>(is, path);
  std::vector<std::uint64_t> rows(n_agents);
  for (auto& m : rows) m = cache::get<std::uint64_t>(is, path);
  std::vector<Matrix> data;
  for (std::uint32_t i = 0; i < n_agents; ++i) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(Eigen::Index(rows[i]), Eigen::Index(n));
    if (!is.read(reinterpret_cast<char*>(a.data()), std::streamsize(a.size() * sizeof(double)))) {
      throw Error("instance cache " + path + ": truncated data");
    }
    data.emplace_back(a);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error("instance cache " + path + ": trailing data");
  return PcaProblem(std::move(data), int(r), gap, seed);
}

}  // namespace drsgt
