#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "fleetmig/config.hpp"

using namespace fleetmig;

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.estimation.ci_level = 0.8;
  c.estimation.paper_mapping = true;
  c.montecarlo.reps = 7;
  auto j = to_json(c);
  auto back = config_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.estimation.ci_level, 0.8);
  EXPECT_TRUE(back.estimation.paper_mapping);
  EXPECT_EQ(back.montecarlo.reps, 7);
  EXPECT_EQ(back.scenario.graph.edges(), c.scenario.graph.edges());
  EXPECT_EQ(back.scenario.dispersion.rates(), c.scenario.dispersion.rates());
  EXPECT_EQ(back.scenario.bio.carrying_capacity, c.scenario.bio.carrying_capacity);
}

TEST(Config, CovariatesRoundTrip) {
  RunConfig c;
  c.scenario = fleetmig::testing::tiny_scenario();
  c.scenario.covariate_names = {"sst"};
  c.scenario.tech.rho = Eigen::VectorXd::Constant(1, 0.3);
  c.scenario.utility.a2 = Eigen::VectorXd::Constant(1, 0.3);
  for (int t = 0; t < c.scenario.horizon; ++t)
    c.scenario.covariates.push_back(Eigen::MatrixXd::Constant(4, 1, 0.5 + t));
  auto back = config_from_json(to_json(c));
  ASSERT_EQ(back.scenario.covariates.size(), c.scenario.covariates.size());
  EXPECT_EQ(back.scenario.covariates[5], c.scenario.covariates[5]);
  EXPECT_EQ(back.scenario.covariate_names, c.scenario.covariate_names);
}

TEST(Config, NullBetaMeansCalibrate) {
  auto j = to_json(RunConfig{});
  j["estimation"]["beta"] = nullptr;
  auto c = config_from_json(j);
  EXPECT_FALSE(c.estimation.beta.has_value());
  EXPECT_FALSE(c.estimation.options().beta.has_value());
}

TEST(Config, InvalidValuesAreConfigErrors) {
  auto j = to_json(RunConfig{});
  j["estimation"]["ci_level"] = 0.85;
  try {
    config_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_EQ(exit_code(e.kind()), 2);
  }
  auto missing = to_json(RunConfig{});
  missing["scenario"].erase("carrying_capacity");
  EXPECT_THROW(config_from_json(missing), Error);
  auto wrong_type = to_json(RunConfig{});
  wrong_type["scenario"]["horizon"] = "long";
  EXPECT_THROW(config_from_json(wrong_type), Error);
  auto bad_k = to_json(RunConfig{});
  bad_k["scenario"]["carrying_capacity"][0] = -1.0;
  EXPECT_THROW(config_from_json(bad_k), Error);
}

TEST(Config, FileRoundTrip) {
  auto dir = fleetmig::testing::scratch_dir("config_file");
  const auto path = (dir / "run.json").string();
  RunConfig c;
  c.data_dir = "elsewhere";
  save_config(path, c);
  auto back = load_config(path);
  EXPECT_EQ(back.data_dir, "elsewhere");
  EXPECT_EQ(to_json(back), to_json(c));
  fleetmig::testing::write_file(dir / "broken.json", "{ not json");
  EXPECT_THROW(load_config((dir / "broken.json").string()), Error);
  EXPECT_THROW(load_config((dir / "absent.json").string()), Error);
}
