#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "fleetmig/report.hpp"
#include "fleetmig/simulator.hpp"

using namespace fleetmig;
using namespace fleetmig::report;

TEST(Fixed, Formats) {
  EXPECT_EQ(fixed(0.028684, 5), "0.02868");
  EXPECT_EQ(fixed(-9.87e-8, 5), "-9.87E-08");
  EXPECT_EQ(fixed(5.56e-8, 5), "5.56E-08");
  EXPECT_EQ(fixed(0.0, 4), "0.0000");
  EXPECT_EQ(fixed(-0.00001, 2), "-1.00E-05");
  EXPECT_EQ(fixed(-0.004, 2), "0.00");
  EXPECT_EQ(fixed(std::nan(""), 2), "NA");
  EXPECT_EQ(fixed(INFINITY, 2), "Inf");
  EXPECT_EQ(fixed(-80.33, 3), "-80.330");
}

TEST(ReportFixture, GrowthAndMigrationTable) {
  ParamTable t;
  t.estimate_decimals = 5;
  t.rows = {{"r", 0.02868, 0.0548, 5.24, {}},
            {"d11", 0.32227, 0.1580, -0.22, {}},
            {"d33", -0.58030, 0.0954, 9.09, {}},
            {"d86", 0.87619, 0.1177, 7.45, {}}};
  const std::string expected =
      "Parameter  Estimate  St. Error  z-value\n"
      "r           0.02868     0.0548     5.24\n"
      "d11         0.32227     0.1580    -0.22\n"
      "d33        -0.58030     0.0954     9.09\n"
      "d86         0.87619     0.1177     7.45\n";
  EXPECT_EQ(to_text(t), expected);
  EXPECT_EQ(to_csv(t),
            "parameter,estimate,std_error,z_value\n"
            "r,0.02868,0.0548,5.24\n"
            "d11,0.32227,0.158,-0.22\n"
            "d33,-0.5803,0.0954,9.09\n"
            "d86,0.87619,0.1177,7.45\n");
}

TEST(ReportFixture, StepTwoReducedFormWithEquations) {
  ParamTable t;
  t.title = "Stage 2 reduced form";
  t.estimate_decimals = 5;
  t.se_decimals = 5;
  t.rows = {{"a0_1", -0.03547, 0.15802, -0.22, {}},
            {"a0_3", 0.86710, 0.09543, 9.09, {}},
            {"a1_1", -9.87e-08, 5.56e-08, -1.77, {}},
            {"a1_8", 2.34e-08, 9.42e-08, 0.25, {}}};
  t.equations = {{"patch1", 571, 4, 0.38}, {"patch4", 571, 6, 0.34}};
  const std::string expected =
      "Stage 2 reduced form\n"
      "\n"
      "Parameter   Estimate  St. Error  z-value\n"
      "a0_1        -0.03547    0.15802    -0.22\n"
      "a0_3         0.86710    0.09543     9.09\n"
      "a1_1       -9.87E-08   5.56E-08    -1.77\n"
      "a1_8        2.34E-08   9.42E-08     0.25\n"
      "\n"
      "Equation  Obs  Parameters    R2\n"
      "patch1    571           4  0.38\n"
      "patch4    571           6  0.34\n";
  EXPECT_EQ(to_text(t), expected);
}

TEST(ReportFixture, StepOneTable) {
  ParamTable t;
  t.rows = {{"a0_2001", 4.8311, 0.0576, 83.86, {}},
            {"a1_2001_1", 0.1500, 0.0138, 10.88, {}},
            {"a1_2001_4", 0.0059, 0.0012, 4.99, {}},
            {"a2_2001", 1.0798, 0.0133, 80.96, {}}};
  t.equations = {{"demand_port1", 906, 98, 0.79}};
  const std::string expected =
      "Parameter  Estimate  St. Error  z-value\n"
      "a0_2001      4.8311     0.0576    83.86\n"
      "a1_2001_1    0.1500     0.0138    10.88\n"
      "a1_2001_4    0.0059     0.0012     4.99\n"
      "a2_2001      1.0798     0.0133    80.96\n"
      "\n"
      "Equation      Obs  Parameters    R2\n"
      "demand_port1  906          98  0.79\n";
  EXPECT_EQ(to_text(t), expected);
}

TEST(ReportFixture, CapacityTable) {
  CapacityTable t;
  t.rows = {{"K1", 6.736, 6.987, 19.045}, {"K2", 2.105, 2.325, 4.168}, {"K8", 11.757, 10.056, -80.330}};
  const std::string expected =
      "       Upper limit CI               Mean\n"
      "Patch          At 80%  At 90%  Estimated\n"
      "K1              6.736   6.987     19.045\n"
      "K2              2.105   2.325      4.168\n"
      "K8             11.757  10.056    -80.330\n";
  EXPECT_EQ(to_text(t), expected);
  EXPECT_EQ(to_csv(t),
            "patch,upper_80,upper_90,mean\n"
            "K1,6.736,6.987,19.045\n"
            "K2,2.105,2.325,4.168\n"
            "K8,11.757,10.056,-80.33\n");
}

TEST(ReportShape, FromEstimation) {
  auto s = default_scenario();
  auto e = expected_run(s);
  auto r = estimate(e.panel, s.graph, annual_totals(e.truth.months, e.truth.biomass));

  auto t1 = stage1_table(r.stage1);
  EXPECT_EQ(t1.rows.size(), 4u + 16u + 4u);
  EXPECT_EQ(t1.equations.size(), 5u);
  EXPECT_EQ(t1.rows.front().name, "a0_2001");
  EXPECT_EQ(t1.rows[4].name, "a1_2001_1");
  EXPECT_EQ(t1.rows.back().name, "a2_2004");

  auto cap = capture_table(r.capture);
  EXPECT_EQ(cap.rows.size(), 8u);
  EXPECT_NEAR(cap.rows[0].estimate, s.tech.gamma, 1e-6);

  auto t2 = stage2_table(r.reduced, s.graph);
  EXPECT_EQ(t2.rows.size(), 8u + 8u + 20u);
  EXPECT_EQ(t2.equations.size(), 8u);
  for (const auto& eq : t2.equations) {
    EXPECT_GE(eq.params, 4);
    EXPECT_LE(eq.params, 6);
  }

  auto st = structural_table(r.structural);
  EXPECT_EQ(st.rows.size(), 1u + 8u + 20u + 1u);
  EXPECT_EQ(st.rows.front().name, "r");
  EXPECT_EQ(st.rows[1].name, "d11");
  EXPECT_EQ(st.rows[9].name, "d12");
  EXPECT_EQ(st.rows[10].name, "d13");
  EXPECT_EQ(st.rows.back().name, "K_total");

  auto kt = capacity_table(r.structural);
  EXPECT_EQ(kt.rows.size(), 8u);
  EXPECT_EQ(kt.rows[0].name, "K1");
}

TEST(ReportShape, CsvIsReadable) {
  auto dir = fleetmig::testing::scratch_dir("report_csv");
  ParamTable t;
  t.rows = {{"r", 0.1, 0.01, 10.0, {}}, {"x", std::nan(""), 0.0, std::nan(""), {}}};
  fleetmig::testing::write_file(dir / "p.csv", to_csv(t));
  auto table = csv::read((dir / "p.csv").string(), {"parameter", "estimate", "std_error", "z_value"});
  EXPECT_EQ(table.lines.size(), 2u);
}

TEST(ReportShape, BiomassCsvOrdering) {
  BiomassPanel b;
  b.n_patches = 2;
  b.biomass = {{{2001 * 12 + 1, 1}, 4.0}, {{2001 * 12, 1}, 3.0}, {{2001 * 12, 0}, 1.0}};
  EXPECT_EQ(biomass_csv(b),
            "patch_id,year,month,biomass_tons\n"
            "1,2001,1,1\n"
            "2,2001,1,3\n"
            "2,2001,2,4\n");
}
