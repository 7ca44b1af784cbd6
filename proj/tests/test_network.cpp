#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "drsgt/network.hpp"
#include "support/oracles.hpp"

namespace drsgt {
namespace {

TEST(BuildTopology, RingOfFourIsCirculantThird) {
  const NetworkSpec net = build_topology(topology::Ring{}, 4);
  EXPECT_EQ(net.edge_count(), 4u);
  Matrix expected(4, 4);
  const double t = 1.0 / 3.0;
  expected << t, t, 0, t,  //
      t, t, t, 0,          //
      0, t, t, t,          //
      t, 0, t, t;
  EXPECT_LE((net.mixing() - expected).norm(), 1e-15);
}

TEST(BuildTopology, CompleteOfFourIsUniform) {
  const NetworkSpec net = build_topology(topology::Complete{}, 4);
  EXPECT_EQ(net.edge_count(), 6u);
  EXPECT_LE((net.mixing() - Matrix::Constant(4, 4, 0.25)).norm(), 1e-15);
}

TEST(BuildTopology, StarHubWeights) {
  const NetworkSpec net = build_topology(topology::Star{}, 5);
  // Hub degree 4, leaves 1: w = 1/5 on every edge.
  EXPECT_DOUBLE_EQ(net.mixing()(0, 3), 0.2);
  EXPECT_DOUBLE_EQ(net.mixing()(3, 3), 0.8);
  EXPECT_NEAR(net.mixing()(0, 0), 0.2, 1e-15);
}

TEST(BuildTopology, DisconnectedExplicitGraphThrows) {
  EXPECT_THROW(build_topology(topology::Explicit{{{0, 1}, {2, 3}}}, 4), TopologyError);
}

TEST(BuildTopology, InvalidInputs) {
  EXPECT_THROW(build_topology(topology::Ring{}, 1), TopologyError);
  EXPECT_THROW(build_topology(topology::Explicit{{{0, 0}, {0, 1}}}, 2), TopologyError);
  EXPECT_THROW(build_topology(topology::Explicit{{{0, 5}}}, 2), TopologyError);
  EXPECT_THROW(build_topology(topology::ErdosRenyi{0.0, 1}, 4), TopologyError);
  // Practically never connected: 1000 resamples exhausted.
  EXPECT_THROW(build_topology(topology::ErdosRenyi{1e-9, 1}, 6), TopologyError);
}

TEST(BuildTopology, ErdosRenyiIsSeededAndConnected) {
  const NetworkSpec a = build_topology(topology::ErdosRenyi{0.4, 42}, 8);
  const NetworkSpec b = build_topology(topology::ErdosRenyi{0.4, 42}, 8);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_TRUE(NetworkSpec::connected(8, a.edges()));
}

TEST(BuildTopology, DuplicateEdgesAreMerged) {
  const NetworkSpec net = build_topology(topology::Explicit{{{0, 1}, {1, 0}, {1, 2}}}, 3);
  EXPECT_EQ(net.edge_count(), 2u);
}

TEST(SpectralDiagnostics, RingOfFour) {
  const NetworkSpec net = build_topology(topology::Ring{}, 4);
  const SpectralDiagnostics d = spectral_diagnostics(net, 1);
  EXPECT_NEAR(d.sigma2, 1.0 / 3.0, 1e-14);
  EXPECT_EQ(d.t_min, 2);
  EXPECT_FALSE(d.meets_bound(1));
  EXPECT_TRUE(d.meets_bound(2));
  EXPECT_NEAR(spectral_diagnostics(net, 2).l_t, 8.0 / 9.0, 1e-14);
}

TEST(SpectralDiagnostics, CompleteOfFour) {
  const SpectralDiagnostics d = spectral_diagnostics(build_topology(topology::Complete{}, 4), 1);
  EXPECT_EQ(d.sigma2, 0.0);
  EXPECT_EQ(d.t_min, 1);
}

TEST(SpectralDiagnostics, SigmaBelowOneForConnectedGraphs) {
  for (int n = 2; n <= 12; ++n) {
    for (const TopologyKind& k : {TopologyKind(topology::Ring{}), TopologyKind(topology::Star{}),
                                  TopologyKind(topology::ErdosRenyi{0.3, std::uint64_t(n)})}) {
      const SpectralDiagnostics d = spectral_diagnostics(build_topology(k, n), 1);
      EXPECT_LT(d.sigma2, 1.0);
      EXPECT_GE(d.sigma2, 0.0);
      if (d.sigma2 > 0) {
        EXPECT_LE(std::pow(d.sigma2, d.t_min), 1.0 / (2.0 * std::sqrt(double(n))) + 1e-12);
      }
    }
  }
}

TEST(Mix, IdenticalValuesUnchanged) {
  std::mt19937_64 rng(1);
  const NetworkSpec net = build_topology(topology::Ring{}, 5);
  const Matrix v = testing::gaussian(3, 2, rng);
  for (int t = 1; t <= 4; ++t) {
    for (const auto& out : mix(net, t, std::vector<Matrix>(5, v))) EXPECT_LE((out - v).norm(), 1e-14);
  }
}

TEST(Mix, CompleteGraphAveragesInOneStep) {
  const NetworkSpec net = build_topology(topology::Complete{}, 4);
  std::vector<Matrix> vals;
  for (int j = 0; j < 4; ++j) vals.push_back(Eigen::VectorXd::Unit(4, j));
  for (const auto& out : mix(net, 1, vals)) EXPECT_LE((out - Matrix::Constant(4, 1, 0.25)).norm(), 1e-15);
}

TEST(Mix, MatchesDensePower) {
  std::mt19937_64 rng(2);
  const NetworkSpec net = build_topology(topology::Ring{}, 4);
  std::vector<Matrix> vals;
  for (int i = 0; i < 4; ++i) vals.push_back(testing::gaussian(8, 3, rng));
  const Matrix w2 = testing::dense_power(net.mixing(), 2);
  const auto out = mix(net, 2, vals);
  for (int i = 0; i < 4; ++i) {
    Matrix expected = Matrix::Zero(8, 3);
    for (int j = 0; j < 4; ++j) expected += w2(i, j) * vals[std::size_t(j)];
    EXPECT_LE((out[std::size_t(i)] - expected).norm(), 1e-13);
  }
}

TEST(Mix, PreservesAverageAndContracts) {
  std::mt19937_64 rng(3);
  for (const TopologyKind& k : {TopologyKind(topology::Ring{}), TopologyKind(topology::Star{}),
                                TopologyKind(topology::ErdosRenyi{0.5, 9})}) {
    const NetworkSpec net = build_topology(k, 6);
    const double s2 = spectral_diagnostics(net, 1).sigma2;
    for (int t = 1; t <= 5; ++t) {
      std::vector<Matrix> vals;
      Matrix mean = Matrix::Zero(4, 2);
      for (int i = 0; i < 6; ++i) {
        vals.push_back(testing::gaussian(4, 2, rng));
        mean += vals.back() / 6.0;
      }
      const auto out = mix(net, t, vals);
      Matrix out_mean = Matrix::Zero(4, 2);
      for (const auto& o : out) out_mean += o / 6.0;
      EXPECT_LE((out_mean - mean).norm(), 1e-12);

      // Mean-zero input contracts by sigma2^t.
      double in_norm = 0.0;
      for (auto& v : vals) {
        v -= mean;
        in_norm += v.squaredNorm();
      }
      double out_norm = 0.0;
      for (const auto& o : mix(net, t, vals)) out_norm += o.squaredNorm();
      EXPECT_LE(std::sqrt(out_norm), std::pow(s2, t) * std::sqrt(in_norm) + 1e-12);
    }
  }
}

TEST(Mix, PowersStayDoublyStochastic) {
  const NetworkSpec net = build_topology(topology::ErdosRenyi{0.4, 3}, 7);
  for (int t = 1; t <= 16; ++t) {
    const Matrix p = net.mixing_power(t);
    EXPECT_LE((p - p.transpose()).norm(), 1e-14);
    EXPECT_LE((p.rowwise().sum() - Eigen::VectorXd::Ones(7)).norm(), 1e-13);
    EXPECT_GE(p.minCoeff(), -1e-15);
  }
}

TEST(Mix, RejectsBadInput) {
  const NetworkSpec net = build_topology(topology::Ring{}, 3);
  EXPECT_THROW(mix(net, 1, std::vector<Matrix>(2, Matrix::Zero(1, 1))), DimensionError);
  EXPECT_THROW(mix(net, 0, std::vector<Matrix>(3, Matrix::Zero(1, 1))), ParameterError);
}

}  // namespace
}  // namespace drsgt
