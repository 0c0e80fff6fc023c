#include <gtest/gtest.h>

#include <random>

#include "fleetmig/patch_model.hpp"

using namespace fleetmig;

namespace {

PatchGraph two_patches() { return PatchGraph(2, {{0, 1}}, Eigen::MatrixXd::Constant(1, 2, 10.0)); }

// D(h, k) is the rate from h into k; rows sum to zero.
DispersionMatrix two_patch_dispersion(const PatchGraph& g) {
  Eigen::MatrixXd d(2, 2);
  d << -0.1, 0.1, 0.2, -0.2;
  return DispersionMatrix(g, d);
}

// Net migration by explicit loops: inflow to k is sum_h d(h, k) x_h.
Eigen::VectorXd scalar_loop_migration(const Eigen::MatrixXd& d, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k)
    for (Eigen::Index h = 0; h < x.size(); ++h) out[k] += d(h, k) * x[h];
  return out;
}

}  // namespace

TEST(LogisticGrowth, ZeroAtCapacityAndAtZero) {
  Eigen::VectorXd K(2);
  K << 100.0, 250.0;
  BioParams p(0.7, K);
  EXPECT_DOUBLE_EQ(logistic_growth(100.0, p, 0), 0.0);
  EXPECT_DOUBLE_EQ(logistic_growth(250.0, p, 1), 0.0);
  EXPECT_DOUBLE_EQ(logistic_growth(0.0, p, 0), 0.0);
}

TEST(LogisticGrowth, HandEvaluation) {
  BioParams p(0.2, Eigen::VectorXd::Constant(1, 100.0));
  EXPECT_NEAR(logistic_growth(50.0, p, 0), 5.0, 1e-12);
}

TEST(LogisticGrowth, NegativeAboveCapacity) {
  BioParams p(0.3, Eigen::VectorXd::Constant(1, 100.0));
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(100.0001, 1e4);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(logistic_growth(u(gen), p, 0), 0.0);
}

TEST(LogisticGrowth, RejectsBadPatch) {
  BioParams p(0.3, Eigen::VectorXd::Constant(1, 100.0));
  EXPECT_THROW(logistic_growth(1.0, p, 1), Error);
}

TEST(BioParams, RejectsNonPositive) {
  EXPECT_THROW(BioParams(0.0, Eigen::VectorXd::Constant(1, 1.0)), Error);
  EXPECT_THROW(BioParams(0.1, Eigen::VectorXd::Constant(1, -1.0)), Error);
}

TEST(PatchGraph, GridAdjacency) {
  auto g = PatchGraph::grid(4, 2, Eigen::MatrixXd::Constant(4, 8, 10.0));
  EXPECT_EQ(g.n_patches(), 8);
  EXPECT_TRUE(g.adjacent(2, 4));
  EXPECT_FALSE(g.adjacent(0, 3));
  for (int h = 0; h < 8; ++h)
    for (int k = 0; k < 8; ++k) EXPECT_EQ(g.adjacent(h, k), g.adjacent(k, h));
  std::size_t degree_sum = 0;
  for (int k = 0; k < 8; ++k) degree_sum += g.neighbors(k).size();
  EXPECT_EQ(degree_sum, 20u);
}

TEST(PatchGraph, RejectsSelfEdgeAndOutOfRange) {
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(1, 2, 1.0);
  EXPECT_THROW(PatchGraph(2, {{0, 0}}, dist), Error);
  EXPECT_THROW(PatchGraph(2, {{0, 2}}, dist), Error);
}

TEST(Dispersion, RejectsNonAdjacentRate) {
  PatchGraph g(3, {{0, 1}, {1, 2}}, Eigen::MatrixXd::Constant(1, 3, 1.0));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d(0, 2) = 0.1;
  d(0, 0) = -0.1;
  EXPECT_THROW(DispersionMatrix(g, d), Error);
}

TEST(Dispersion, ConventionChecks) {
  auto g = two_patches();
  Eigen::MatrixXd d(2, 2);
  d << -0.1, 0.2, 0.2, -0.2;
  EXPECT_THROW(DispersionMatrix(g, d, RowSumConvention::conservative_zero), Error);
  EXPECT_NO_THROW(DispersionMatrix(g, d, RowSumConvention::unconstrained));
  Eigen::MatrixXd one(2, 2);
  one << 0.9, 0.1, 0.3, 0.7;
  EXPECT_NO_THROW(DispersionMatrix(g, one, RowSumConvention::paper_one));
  EXPECT_THROW(DispersionMatrix(g, one, RowSumConvention::conservative_zero), Error);
  EXPECT_EQ(parse_row_sum_convention(to_string(RowSumConvention::paper_one)), RowSumConvention::paper_one);
  EXPECT_THROW(parse_row_sum_convention("rows_sum_to_two"), Error);
}

TEST(NetMigration, ZeroMatrixGivesZero) {
  auto g = two_patches();
  Eigen::VectorXd x(2);
  x << 10.0, 20.0;
  EXPECT_EQ(net_migration({x, 0}, DispersionMatrix::zero(g)), Eigen::VectorXd::Zero(2));
}

TEST(NetMigration, TwoPatchHandExpansion) {
  auto g = two_patches();
  auto d = two_patch_dispersion(g);
  Eigen::VectorXd x(2);
  x << 10.0, 20.0;
  Eigen::VectorXd mn = net_migration({x, 0}, d);
  EXPECT_NEAR(mn[0], 3.0, 1e-12);
  EXPECT_NEAR(mn[1], -3.0, 1e-12);
  EXPECT_TRUE(mn.isApprox(scalar_loop_migration(d.rates(), x)));
}

TEST(NetMigration, ConservativeSumsToZeroAndMatchesLoop) {
  auto g = PatchGraph::grid(4, 2, Eigen::MatrixXd::Constant(1, 8, 1.0));
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> rate(0.0, 0.2), stock(0.0, 1e5);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(8, 8);
    for (auto [h, k] : g.edges()) {
      off(h, k) = rate(gen);
      off(k, h) = rate(gen);
    }
    auto d = DispersionMatrix::conservative(g, off);
    Eigen::VectorXd x(8);
    for (int k = 0; k < 8; ++k) x[k] = stock(gen);
    Eigen::VectorXd mn = net_migration({x, 0}, d);
    EXPECT_NEAR(mn.sum(), 0.0, 1e-9);
    EXPECT_LT((mn - scalar_loop_migration(d.rates(), x)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Step, EquilibriumWithoutHarvest) {
  Eigen::VectorXd K(2);
  K << 100.0, 200.0;
  BioParams p(0.4, K);
  auto g = two_patches();
  auto next = step({K, 0}, p, DispersionMatrix::zero(g), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(next.state.x, K);
  EXPECT_EQ(next.state.t, 1);
  EXPECT_FALSE(next.any_depleted());
}

TEST(Step, HarvestOffsetsGrowth) {
  Eigen::VectorXd K(2);
  K << 100.0, 200.0;
  BioParams p(0.4, K);
  Eigen::VectorXd x(2), h(2);
  x << 30.0, 170.0;
  for (int k = 0; k < 2; ++k) h[k] = logistic_growth(x[k], p, k);
  auto next = step({x, 0}, p, DispersionMatrix::zero(two_patches()), h);
  EXPECT_NEAR(next.state.x[0], 30.0, 1e-12);
  EXPECT_NEAR(next.state.x[1], 170.0, 1e-12);
}

TEST(Step, TwoPatchWithIdentityTransition) {
  auto g = two_patches();
  // r must be positive for BioParams; capacities at infinity make growth vanish.
  BioParams p(1e-300, Eigen::VectorXd::Constant(2, 1e300));
  Eigen::VectorXd x(2);
  x << 10.0, 20.0;
  auto next = step({x, 0}, p, two_patch_dispersion(g), Eigen::VectorXd::Zero(2));
  EXPECT_NEAR(next.state.x[0], 13.0, 1e-12);
  EXPECT_NEAR(next.state.x[1], 17.0, 1e-12);
}

TEST(Step, FloorsAtZeroAndFlags) {
  BioParams p(0.1, Eigen::VectorXd::Constant(2, 100.0));
  Eigen::VectorXd x(2), h(2);
  x << 10.0, 50.0;
  h << 1000.0, 0.0;
  auto next = step({x, 0}, p, DispersionMatrix::zero(two_patches()), h);
  EXPECT_EQ(next.state.x[0], 0.0);
  EXPECT_TRUE(next.depleted[0]);
  EXPECT_FALSE(next.depleted[1]);
  EXPECT_THROW(step({x, 0}, p, DispersionMatrix::zero(two_patches()), -h), Error);
}

TEST(Step, MassConservedWithoutHarvest) {
  auto g = PatchGraph::grid(4, 2, Eigen::MatrixXd::Constant(1, 8, 1.0));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> rate(0.0, 0.1), frac(0.05, 1.2);
  Eigen::VectorXd K = Eigen::VectorXd::LinSpaced(8, 5e4, 1.2e5);
  BioParams p(0.25, K);
  for (int rep = 0; rep < 500; ++rep) {
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(8, 8);
    for (auto [h, k] : g.edges()) {
      off(h, k) = rate(gen);
      off(k, h) = rate(gen);
    }
    auto d = DispersionMatrix::conservative(g, off);
    Eigen::VectorXd x(8);
    for (int k = 0; k < 8; ++k) x[k] = frac(gen) * K[k];
    double expected = 0.0;
    for (int k = 0; k < 8; ++k) expected += x[k] + logistic_growth(x[k], p, k);
    auto next = step({x, 0}, p, d, Eigen::VectorXd::Zero(8));
    EXPECT_NEAR(next.state.x.sum(), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Step, Deterministic) {
  auto g = two_patches();
  BioParams p(0.3, Eigen::VectorXd::Constant(2, 100.0));
  Eigen::VectorXd x(2), h(2);
  x << 40.0, 70.0;
  h << 1.5, 2.5;
  auto a = step({x, 0}, p, two_patch_dispersion(g), h);
  auto b = step({x, 0}, p, two_patch_dispersion(g), h);
  EXPECT_EQ(a.state.x, b.state.x);
}
