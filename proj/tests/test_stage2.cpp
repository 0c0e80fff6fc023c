#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fleetmig/simulator.hpp"
#include "fleetmig/stage2.hpp"

using namespace fleetmig;

namespace {

BiomassPanel panel_from(const std::vector<YearMonth>& months, const std::vector<Eigen::VectorXd>& x) {
  BiomassPanel b;
  b.n_patches = static_cast<int>(x.front().size());
  b.beta_used = 1.0;
  for (std::size_t t = 0; t < months.size(); ++t)
    for (Eigen::Index k = 0; k < x[t].size(); ++k) {
      b.biomass[{months[t].ordinal(), static_cast<int>(k)}] = x[t][k];
      b.effect[{months[t].ordinal(), static_cast<int>(k)}] = std::log(x[t][k]);
    }
  return b;
}

std::map<Cell, double> harvest_from(const std::vector<YearMonth>& months,
                                    const std::vector<Eigen::VectorXd>& h) {
  std::map<Cell, double> out;
  for (std::size_t t = 0; t < months.size(); ++t)
    for (Eigen::Index k = 0; k < h[t].size(); ++k) out[{months[t].ordinal(), static_cast<int>(k)}] = h[t][k];
  return out;
}

/// Reduced-form coefficients implied by a scenario under the canonical mapping.
econ::EstimateSet forward_map(const Scenario& s, double se) {
  const int n = s.n_patches();
  econ::EstimateSet est;
  std::vector<double> v;
  for (int k = 0; k < n; ++k) {
    est.labels.push_back(labels::alpha0(k));
    v.push_back(1.0 + s.bio.r + s.dispersion.rate(k, k));
    est.labels.push_back(labels::alpha1(k));
    v.push_back(s.bio.r / s.bio.carrying_capacity[k]);
    for (int h : s.graph.neighbors(k)) {
      est.labels.push_back(labels::d(h, k, n));
      v.push_back(s.dispersion.rate(h, k));
    }
  }
  est.estimates = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  est.std_errors = Eigen::VectorXd::Constant(est.estimates.size(), se);
  est.covariance = Eigen::MatrixXd(est.std_errors.cwiseAbs2().asDiagonal());
  est.reindex();
  return est;
}

AuxFit aux_of(const Scenario& s) {
  AuxFit a;
  a.r = s.bio.r;
  a.K_total = s.bio.carrying_capacity.sum();
  return a;
}

}  // namespace

TEST(MigrationRows, RegressorCountsFollowDegree) {
  auto s = default_scenario();
  auto e = expected_run(s);
  Stage2Spec spec{panel_from(e.truth.months, e.truth.biomass), s.graph,
                  harvest_from(e.truth.months, e.truth.harvest), true};
  auto rows = build_migration_rows(spec);
  ASSERT_EQ(rows.equations.size(), 8u);
  std::set<Eigen::Index> counts;
  for (int k = 0; k < 8; ++k) {
    EXPECT_EQ(rows.equations[k].X.cols(), static_cast<Eigen::Index>(2 + s.graph.neighbors(k).size()));
    EXPECT_EQ(rows.equations[k].y.size(), 47);
    EXPECT_EQ(rows.dropped[k], 0);
    counts.insert(rows.equations[k].X.cols());
  }
  EXPECT_EQ(counts, (std::set<Eigen::Index>{4, 5}));
  EXPECT_EQ(rows.equations[0].X.cols(), 4);
}

TEST(MigrationRows, ConstantBiomassIdentityDynamics) {
  PatchGraph g(3, {{0, 1}, {1, 2}}, Eigen::MatrixXd::Constant(1, 3, 1.0));
  std::vector<YearMonth> months;
  std::vector<Eigen::VectorXd> x;
  for (int t = 0; t < 6; ++t) {
    months.push_back(YearMonth{2001, 1}.plus(t));
    x.push_back(Eigen::Vector3d(5.0, 7.0, 11.0));
  }
  Stage2Spec spec{panel_from(months, x), g, {}, false};
  auto rows = build_migration_rows(spec);
  for (const auto& eq : rows.equations) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(eq.X.cols());
    b[0] = 1.0;
    EXPECT_LT((eq.y - eq.X * b).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MigrationRows, GapsAreCountedAndShortPatchesRejected) {
  PatchGraph g(2, {{0, 1}}, Eigen::MatrixXd::Constant(1, 2, 1.0));
  std::vector<YearMonth> months;
  std::vector<Eigen::VectorXd> x;
  for (int t = 0; t < 8; ++t) {
    months.push_back(YearMonth{2001, 1}.plus(t));
    x.push_back(Eigen::Vector2d(5.0 + t, 7.0 - 0.5 * t));
  }
  auto b = panel_from(months, x);
  b.biomass.erase({months[3].ordinal(), 1});
  auto rows = build_migration_rows({b, g, {}, false});
  EXPECT_EQ(rows.dropped[0], 1);  // t=3: neighbor missing
  EXPECT_EQ(rows.dropped[1], 1);  // t=2: no successor
  for (int t = 2; t < 8; ++t) b.biomass.erase({months[t].ordinal(), 0});
  EXPECT_THROW(build_migration_rows({b, g, {}, false}), Error);
}

TEST(FitStage2, TrueBiomassRecoversTransition) {
  auto s = default_scenario();
  auto e = expected_run(s);
  Stage2Spec spec{panel_from(e.truth.months, e.truth.biomass), s.graph,
                  harvest_from(e.truth.months, e.truth.harvest), true};
  auto est = fit_stage2(build_migration_rows(spec));
  auto truth = forward_map(s, 0.0);
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    double scale = std::max(1.0, std::abs(truth.estimates[static_cast<Eigen::Index>(i)]));
    EXPECT_NEAR(est.value(truth.labels[i]), truth.estimates[static_cast<Eigen::Index>(i)], 1e-6 * scale)
        << truth.labels[i];
  }
  std::size_t off_diagonal = 0;
  for (const auto& l : est.labels)
    if (l[0] == 'd') ++off_diagonal;
  EXPECT_EQ(off_diagonal, 20u);
}

TEST(AuxTotal, ExactLogistic) {
  std::vector<double> X{2e5}, H;
  for (int t = 0; t < 80; ++t) {
    double x = X.back();
    X.push_back(x + 0.05 * x * (1.0 - x / 1e6));
    H.push_back(0.0);
  }
  auto fit = fit_aux_total(X, H);
  EXPECT_NEAR(fit.r / 0.05, 1.0, 1e-6);
  EXPECT_NEAR(fit.K_total / 1e6, 1.0, 1e-6);
}

TEST(AuxTotal, WithHarvest) {
  std::vector<double> X{5e5}, H;
  for (int t = 0; t < 60; ++t) {
    double x = X.back();
    double h = 0.01 * x * (1.0 + 0.5 * std::sin(t));
    X.push_back(x + 0.2 * x * (1.0 - x / 8e5) - h);
    H.push_back(h);
  }
  auto fit = fit_aux_total(X, H);
  EXPECT_NEAR(fit.r, 0.2, 1e-8);
  EXPECT_NEAR(fit.K_total, 8e5, 1e-3);
}

TEST(AuxTotal, EquilibriumIsUnidentified) {
  std::vector<double> X(10, 1e6), H(9, 0.0);
  try {
    fit_aux_total(X, H);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(AuxTotal, ShortSeries) {
  EXPECT_THROW(fit_aux_total({1.0, 2.0, 3.0}, {0.0, 0.0}), Error);
}

TEST(AuxTotal, JacobianMatchesFiniteDifferences) {
  AggregateLogistic m{Eigen::VectorXd::LinSpaced(30, 0.3, 1.7), Eigen::VectorXd::LinSpaced(30, 0.1, -0.2)};
  auto res = [&](const Eigen::VectorXd& p) { return m.residual(p); };
  for (double r : {0.01, 0.2, 1.3})
    for (double K : {0.5, 1.0, 4.0}) {
      Eigen::Vector2d p(r, K);
      EXPECT_LT(econ::jacobian_discrepancy(m.jacobian(p), econ::central_difference_jacobian(res, p)), 1e-6);
    }
}

TEST(RecoverStructure, RoundTrip) {
  auto s = default_scenario();
  auto st = recover_structure(forward_map(s, 1e-9), aux_of(s), s.graph, 0.9);
  Eigen::MatrixXd d = st.dispersion(8);
  EXPECT_LT((d - s.dispersion.rates()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(st.rescale_factor, 1.0, 1e-12);
  for (const auto& c : st.capacity) {
    EXPECT_NEAR(c.k_final / s.bio.carrying_capacity[c.patch], 1.0, 1e-10);
    EXPECT_FALSE(c.fallback);
  }
  EXPECT_EQ(st.d_pair.size(), 20u);
}

TEST(RecoverStructure, ZeroOwnRateMapping) {
  PatchGraph g(1, {}, Eigen::MatrixXd::Constant(1, 1, 1.0));
  econ::EstimateSet est;
  est.labels = {labels::alpha0(0), labels::alpha1(0)};
  est.estimates = Eigen::Vector2d(1.0 + 0.3, 0.3 / 500.0);
  est.std_errors = Eigen::Vector2d(0.01, 1e-6);
  est.covariance = Eigen::Matrix2d(est.std_errors.cwiseAbs2().asDiagonal());
  est.reindex();
  AuxFit aux;
  aux.r = 0.3;
  aux.K_total = 500.0;
  auto st = recover_structure(est, aux, g, 0.9);
  EXPECT_NEAR(st.d_own[0].value, 0.0, 1e-15);
  EXPECT_NEAR(st.capacity[0].k_point, 500.0, 1e-9);
  auto alt = recover_structure(est, aux, g, 0.9, StructuralMapping::alternative);
  EXPECT_NEAR(alt.d_own[0].value, 0.3 - 1.3, 1e-15);
  EXPECT_EQ(alt.capacity[0].k_final, st.capacity[0].k_final);
}

TEST(RecoverStructure, RescalingPreservesRatios) {
  auto s = default_scenario();
  AuxFit aux = aux_of(s);
  aux.K_total = 450e3;
  auto st = recover_structure(forward_map(s, 1e-9), aux, s.graph, 0.9);
  double sum = 0.0;
  for (const auto& c : st.capacity) sum += c.k_final;
  EXPECT_NEAR(sum, 450e3, 1e-6);
  for (const auto& a : st.capacity)
    for (const auto& b : st.capacity)
      EXPECT_NEAR(a.k_final / b.k_final, a.k_chosen / b.k_chosen, 1e-14 * a.k_chosen / b.k_chosen);
}

TEST(RecoverStructure, FallbackToCiUpperLimit) {
  // Point capacity -80.330 with 80% upper-limit capacity 11.757 (last patch).
  const double r = 0.02868;
  const double z80 = econ::two_sided_z(0.8);
  auto s = default_scenario();
  auto est = forward_map(s, 1e-9);
  const double a1 = r / -80.330;
  const double se = (r / 11.757 - a1) / z80;
  est.estimates[est.index_of(labels::alpha1(7))] = a1;
  est.std_errors[est.index_of(labels::alpha1(7))] = se;
  AuxFit aux;
  aux.r = r;
  aux.K_total = 600.0;
  auto st = recover_structure(est, aux, s.graph, 0.8);
  const auto& k8 = st.capacity[7];
  EXPECT_TRUE(k8.fallback);
  EXPECT_FALSE(k8.unidentified);
  EXPECT_NEAR(k8.k_point, -80.330, 1e-9);
  EXPECT_NEAR(k8.k_upper80, 11.757, 1e-9);
  EXPECT_NEAR(k8.k_chosen, 11.757, 1e-9);
  for (const auto& c : st.capacity) EXPECT_GT(c.k_final, 0.0);
}

TEST(RecoverStructure, UnidentifiedPatchExcluded) {
  auto s = default_scenario();
  auto est = forward_map(s, 1e-9);
  est.estimates[est.index_of(labels::alpha1(2))] = -1.0;
  est.std_errors[est.index_of(labels::alpha1(2))] = 1e-3;
  auto st = recover_structure(est, aux_of(s), s.graph, 0.9);
  EXPECT_TRUE(st.capacity[2].unidentified);
  EXPECT_TRUE(std::isnan(st.capacity[2].k_final));
  double sum = 0.0;
  for (const auto& c : st.capacity)
    if (!c.unidentified) sum += c.k_final;
  EXPECT_NEAR(sum, s.bio.carrying_capacity.sum(), 1e-6);

  for (int k = 0; k < 8; ++k) est.estimates[est.index_of(labels::alpha1(k))] = -1.0;
  EXPECT_THROW(recover_structure(est, aux_of(s), s.graph, 0.9), Error);
}

TEST(RecoverStructure, NoClampingOfRates) {
  auto s = default_scenario();
  auto est = forward_map(s, 1e-9);
  est.estimates[est.index_of(labels::d(0, 1, 8))] = -0.37;
  auto st = recover_structure(est, aux_of(s), s.graph, 0.9);
  EXPECT_EQ(st.dispersion(8)(0, 1), -0.37);
}

TEST(Labels, TwoDigitIds) {
  EXPECT_EQ(labels::d(2, 4, 8), "d35");
  EXPECT_EQ(labels::d(2, 10, 12), "d3_11");
}

TEST(AggregateSeries, UsesLongestCompleteRun) {
  std::vector<YearMonth> months;
  std::vector<Eigen::VectorXd> x, h;
  for (int t = 0; t < 12; ++t) {
    months.push_back(YearMonth{2001, 1}.plus(t));
    x.push_back(Eigen::Vector2d(100.0 + t, 200.0 + t));
    h.push_back(Eigen::Vector2d(1.0, 2.0));
  }
  auto b = panel_from(months, x);
  b.biomass.erase({months[3].ordinal(), 1});
  b.biomass.erase({months[10].ordinal(), 0});
  Stage2Spec spec{b, PatchGraph(2, {{0, 1}}, Eigen::MatrixXd::Constant(1, 2, 1.0)), harvest_from(months, h),
                  true};
  auto [X, H] = aggregate_series(spec);
  ASSERT_EQ(X.size(), 6u);
  EXPECT_DOUBLE_EQ(X.front(), 300.0 + 2 * 4);
  EXPECT_DOUBLE_EQ(X.back(), 300.0 + 2 * 9);
  EXPECT_DOUBLE_EQ(H.front(), 3.0);
}
