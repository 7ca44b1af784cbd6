#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "drsgt/engine.hpp"
#include "drsgt/oracle.hpp"
#include "drsgt/pca.hpp"
#include "support/oracles.hpp"

namespace drsgt {
namespace {

const PcaProblem& small_instance() {
  static const PcaProblem p = generate_pca_instance(4, 200, 8, 3, 0.8, 2024);
  return p;
}

TEST(PcaProblem, Shape) {
  const PcaProblem& p = small_instance();
  EXPECT_EQ(p.n_agents(), 4);
  EXPECT_EQ(p.n(), 8);
  EXPECT_EQ(p.r(), 3);
  EXPECT_EQ(p.data(2).rows(), 200);
  EXPECT_LE(p.x_star().orthonormality_error(), 1e-12);
}

TEST(PcaProblem, FStarIsHalfTopEigenvalueSum) {
  const PcaProblem& p = small_instance();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.global_covariance());
  const Vector ev = eig.eigenvalues();
  EXPECT_NEAR(p.f_star(), -0.5 * (ev(7) + ev(6) + ev(5)), 1e-12);
  EXPECT_NEAR(p.objective(p.x_star().matrix()), p.f_star(), 1e-12);
}

TEST(PcaProblem, XStarIsGloballyOptimal) {
  const PcaProblem& p = small_instance();
  std::mt19937_64 rng(1);
  for (int j = 0; j < 100; ++j) {
    EXPECT_LE(p.f_star(), p.objective(random_stiefel_point(8, 3, rng).matrix()) + 1e-12);
  }
  EXPECT_LE(exact_riemannian_gradient(p, p.x_star()).norm(), 1e-8);
}

TEST(PcaProblem, InvalidGeneration) {
  EXPECT_THROW(generate_pca_instance(4, 10, 8, 3, 0.0, 1), ParameterError);
  EXPECT_THROW(generate_pca_instance(4, 10, 8, 3, 1.5, 1), ParameterError);
  EXPECT_THROW(generate_pca_instance(4, 10, 8, 8, 0.5, 1), ParameterError);
  EXPECT_THROW(PcaProblem({Matrix(0, 4)}, 2), OracleError);
  EXPECT_THROW(PcaProblem({Matrix::Ones(3, 4), Matrix::Ones(3, 5)}, 2), DimensionError);
}

TEST(PcaProblem, SameSeedSameData) {
  const PcaProblem a = generate_pca_instance(2, 30, 5, 2, 0.5, 77);
  const PcaProblem b = generate_pca_instance(2, 30, 5, 2, 0.5, 77);
  EXPECT_EQ(a.data(1), b.data(1));
}

TEST(ExactGradient, AverageOfLocalsIsGlobal) {
  const PcaProblem& p = small_instance();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const StiefelPoint x = random_stiefel_point(8, 3, rng);
    Matrix avg = Matrix::Zero(8, 3);
    for (int i = 0; i < 4; ++i) avg += exact_riemannian_gradient(p, i, x).matrix() / 4.0;
    EXPECT_LE((avg - exact_riemannian_gradient(p, x).matrix()).norm(), 1e-12);
  }
}

TEST(ExactGradient, FiniteDifference) {
  const PcaProblem& p = small_instance();
  std::mt19937_64 rng(3);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const StiefelPoint x = random_stiefel_point(8, 3, rng);
    const TangentVector v = random_tangent(x, 1.0, rng);
    const TangentVector g = exact_riemannian_gradient(p, x);
    const TangentVector hv = TangentVector::unchecked(x, h * v.matrix());
    const double fd = (p.objective(polar_retraction(x, hv).matrix()) - p.objective(x.matrix())) / h;
    const double dd = (g.matrix().array() * v.matrix().array()).sum();
    EXPECT_LE(std::abs(fd - dd), 1e-4 * g.norm() * v.norm());
  }
}

TEST(ExactGradient, LipschitzTypeBound) {
  const PcaProblem& p = small_instance();
  std::mt19937_64 rng(4);
  const double lg = p.smoothness_bound();
  for (int trial = 0; trial < 1000; ++trial) {
    const StiefelPoint x = random_stiefel_point(8, 3, rng);
    const StiefelPoint y = random_stiefel_point(8, 3, rng);
    const Matrix d = y.matrix() - x.matrix();
    const double lhs = std::abs(p.objective(y.matrix()) - p.objective(x.matrix()) -
                                (exact_riemannian_gradient(p, x).matrix().array() * d.array()).sum());
    EXPECT_LE(lhs, 0.5 * lg * d.squaredNorm() + 1e-12);
  }
}

TEST(PcaRowSampler, EnumerationEqualsExact) {
  const PcaProblem& p = small_instance();
  const PcaRowSampler sampler(p, PcaRowSampler::Mode::kEnumerateRows);
  std::mt19937_64 rng(5);
  Rng unused(0);
  for (int trial = 0; trial < 20; ++trial) {
    const StiefelPoint x = random_stiefel_point(8, 3, rng);
    for (int i = 0; i < 4; ++i) {
      const GradientSample s = sampler.sample(i, x, 200, unused);
      EXPECT_EQ(s.samples_used, 200u);
      EXPECT_LE((s.value.matrix() - exact_riemannian_gradient(p, i, x).matrix()).norm(), 1e-12);
    }
  }
}

TEST(PcaRowSampler, MonteCarloMeanIsUnbiased) {
  const PcaProblem& p = small_instance();
  const PcaRowSampler sampler(p);
  Rng rng = make_stream(99, 1);
  const StiefelPoint x = random_stiefel_point(8, 3, rng);
  constexpr int draws = 100000;
  Matrix sum = Matrix::Zero(8, 3);
  Matrix sq = Matrix::Zero(8, 3);
  for (int d = 0; d < draws; ++d) {
    const Matrix g = sampler.sample(1, x, 1, rng).value.matrix();
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Matrix mean = sum / draws;
  const Matrix sd = ((sq / draws - mean.cwiseProduct(mean)) * (double(draws) / (draws - 1))).cwiseSqrt();
  const Matrix exact = exact_riemannian_gradient(p, 1, x).matrix();
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      EXPECT_LE(std::abs(mean(i, j) - exact(i, j)), 3.0 * sd(i, j) / std::sqrt(double(draws))) << i << "," << j;
}

TEST(PcaRowSampler, VarianceScalesInverselyWithBatch) {
  const PcaProblem& p = small_instance();
  const PcaRowSampler sampler(p);
  Rng rng = make_stream(7, 3);
  const StiefelPoint x = random_stiefel_point(8, 3, rng);
  const double v1 = empirical_variance(sampler, 0, x, 1, 10000, rng);
  for (std::uint64_t b : {4u, 16u}) {
    const double vb = empirical_variance(sampler, 0, x, b, 10000, rng);
    EXPECT_NEAR(vb / (v1 / double(b)), 1.0, 0.2) << "batch " << b;
  }
}

TEST(PcaRowSampler, MultinomialPathMatchesMeanAndVariance) {
  // Batches above m_i use multinomial counts; check the same law holds there.
  const PcaProblem p = generate_pca_instance(1, 20, 5, 2, 0.5, 8);
  const PcaRowSampler sampler(p);
  Rng rng = make_stream(8, 1);
  const StiefelPoint x = random_stiefel_point(5, 2, rng);
  const double v1 = empirical_variance(sampler, 0, x, 1, 20000, rng);
  const double v64 = empirical_variance(sampler, 0, x, 64, 20000, rng);
  EXPECT_NEAR(v64 / (v1 / 64.0), 1.0, 0.1);
  Matrix mean = Matrix::Zero(5, 2);
  for (int d = 0; d < 20000; ++d) mean += sampler.sample(0, x, 1000, rng).value.matrix() / 20000.0;
  EXPECT_LE((mean - exact_riemannian_gradient(p, 0, x).matrix()).norm(), 1e-3);
}

TEST(PcaRowSampler, SamplesAreBoundedAndTangent) {
  const PcaProblem& p = small_instance();
  const PcaRowSampler sampler(p);
  Rng rng = make_stream(9, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const StiefelPoint x = random_stiefel_point(8, 3, rng);
    const GradientSample s = sampler.sample(trial % 4, x, 1, rng);
    EXPECT_LE(s.value.norm(), p.sample_bound() * (1 + 1e-12));
    EXPECT_LE(tangency_error(x, s.value.matrix()), 1e-12 * std::max(1.0, s.value.norm()));
    EXPECT_EQ(s.samples_used, 1u);
  }
}

TEST(PcaRowSampler, RejectsZeroBatch) {
  const PcaRowSampler sampler(small_instance());
  Rng rng(1);
  EXPECT_THROW(sampler.sample(0, small_instance().x_star(), 0, rng), OracleError);
}

TEST(SyntheticNoiseOracle, VarianceIsSigmaSquaredOverBatch) {
  const PcaProblem& p = small_instance();
  const double sigma = 0.3;
  const SyntheticNoiseOracle oracle(p, sigma);
  Rng rng = make_stream(10, 1);
  const StiefelPoint x = random_stiefel_point(8, 3, rng);
  EXPECT_DOUBLE_EQ(SyntheticNoiseOracle::tangent_dimension(8, 3), 18.0);
  for (std::uint64_t b : {1u, 4u, 16u}) {
    const double v = empirical_variance(oracle, 2, x, b, 10000, rng);
    EXPECT_NEAR(v / (sigma * sigma / double(b)), 1.0, 0.05) << "batch " << b;
  }
  EXPECT_THROW(SyntheticNoiseOracle(p, -1.0), OracleError);
}

TEST(InstanceCache, RoundTrip) {
  const PcaProblem& p = small_instance();
  const auto dir = std::filesystem::temp_directory_path() / "drsgt_cache_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "inst.bin").string();
  write_instance(p, path);
  const PcaProblem q = read_instance(path);
  EXPECT_EQ(q.n_agents(), p.n_agents());
  EXPECT_EQ(q.r(), p.r());
  EXPECT_EQ(q.seed(), p.seed());
  EXPECT_EQ(q.eigengap(), p.eigengap());
  for (int i = 0; i < p.n_agents(); ++i) EXPECT_EQ(q.data(i), p.data(i));
  EXPECT_EQ(q.f_star(), p.f_star());

  // 8 + 4 + 12 + 8 + 8 header bytes, 4 row counts, 800 rows of 8 doubles.
  EXPECT_EQ(std::filesystem::file_size(path), 40u + 32u + 800u * 8u * 8u);

  std::ofstream(path, std::ios::binary | std::ios::app) << 'x';
  EXPECT_THROW(read_instance(path), Error);
  std::filesystem::resize_file(path, 1000);
  EXPECT_THROW(read_instance(path), Error);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOTACACHEFILE";
  }
  EXPECT_THROW(read_instance(path), Error);
  EXPECT_THROW(read_instance((dir / "missing.bin").string()), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace drsgt
