#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path workdir(const std::string& name) {
  fs::path d = fs::path(FLEETMIG_TEST_TMP) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Outcome cli(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  std::string cmd = "cd '" + dir.string() + "' && '" FLEETMIG_CLI_PATH "' " + args + " > '" + out.string() +
                    "' 2> '" + err.string() + "'";
  int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

void small_config(const fs::path& dir, int horizon = 12) {
  ASSERT_EQ(cli(dir, "init-config -o run.json").code, 0);
  nlohmann::json j;
  std::ifstream(dir / "run.json") >> j;
  j["scenario"]["horizon"] = horizon;
  j["montecarlo"]["reps"] = 2;
  std::ofstream(dir / "run.json") << j.dump(2);
}

const char* kDataFiles[] = {"trips.csv", "roster.csv", "prices.csv", "distances.csv", "truth.csv",
                            "annual_totals.csv"};
const char* kReportFiles[] = {"stage1_params.csv", "stage1_equations.csv", "stage1_params.txt",
                              "capture_params.csv", "capture_params.txt", "biomass.csv",
                              "stage2_params.csv", "stage2_equations.csv", "stage2_params.txt",
                              "structural_params.csv", "structural_params.txt", "capacity.csv",
                              "capacity.txt", "capacity_detail.csv", "diagnostics.csv"};

}  // namespace

TEST(Cli, InitConfigToStdout) {
  auto dir = workdir("init");
  auto o = cli(dir, "init-config -o -");
  ASSERT_EQ(o.code, 0);
  auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["scenario"]["n_patches"], 8);
}

TEST(Cli, SimulateIsDeterministic) {
  auto dir = workdir("simulate");
  small_config(dir);
  auto a = cli(dir, "simulate -c run.json --seed 5 --data a");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("seed 5"), std::string::npos);
  ASSERT_EQ(cli(dir, "simulate -c run.json --seed 5 --data b").code, 0);
  ASSERT_EQ(cli(dir, "simulate -c run.json --seed 6 --data c").code, 0);
  for (const char* f : kDataFiles) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_NE(slurp(dir / "a" / "trips.csv"), slurp(dir / "c" / "trips.csv"));
}

TEST(Cli, EstimateProducesReproducibleReports) {
  auto dir = workdir("estimate");
  small_config(dir, 24);
  ASSERT_EQ(cli(dir, "simulate -c run.json").code, 0);
  auto a = cli(dir, "estimate -c run.json --reports r1");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(cli(dir, "estimate -c run.json --reports r2").code, 0);
  for (const char* f : kReportFiles) {
    ASSERT_TRUE(fs::exists(dir / "r1" / f)) << f;
    EXPECT_EQ(slurp(dir / "r1" / f), slurp(dir / "r2" / f)) << f;
  }
}

TEST(Cli, AlternativeMappingOnlyChangesStructure) {
  auto dir = workdir("mapping");
  small_config(dir, 24);
  ASSERT_EQ(cli(dir, "simulate -c run.json").code, 0);
  ASSERT_EQ(cli(dir, "estimate -c run.json --reports canon").code, 0);
  auto o = cli(dir, "estimate -c run.json --paper-mapping --reports alt");
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"stage1_params.csv", "capture_params.csv", "biomass.csv", "stage2_params.csv"})
    EXPECT_EQ(slurp(dir / "canon" / f), slurp(dir / "alt" / f)) << f;
  EXPECT_NE(slurp(dir / "canon" / "structural_params.csv"), slurp(dir / "alt" / "structural_params.csv"));
}

TEST(Cli, MissingInputIsDataError) {
  auto dir = workdir("missing");
  small_config(dir);
  ASSERT_EQ(cli(dir, "simulate -c run.json").code, 0);
  fs::remove(dir / "data" / "distances.csv");
  auto o = cli(dir, "estimate -c run.json");
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("distances.csv"), std::string::npos);
  auto j = nlohmann::json::parse(o.err.substr(o.err.rfind('{')));
  EXPECT_EQ(j["kind"], "data");
}

TEST(Cli, BadArgumentsAreConfigErrors) {
  auto dir = workdir("badargs");
  small_config(dir);
  EXPECT_EQ(cli(dir, "estimate -c run.json --ci-level 0.5").code, 2);
  EXPECT_EQ(cli(dir, "simulate -c absent.json").code, 2);
  EXPECT_EQ(cli(dir, "simulate").code, 2);
  EXPECT_EQ(cli(dir, "estimate -c run.json --beta 0.8 --calibrate-beta").code, 2);
}

TEST(Cli, MonteCarloWritesSummaries) {
  auto dir = workdir("mc");
  small_config(dir);
  auto o = cli(dir, "montecarlo -c run.json --reps 2 --threads 1 --out mc");
  ASSERT_EQ(o.code, 0) << o.err;
  auto reps = slurp(dir / "mc" / "montecarlo_replications.csv");
  EXPECT_EQ(std::count(reps.begin(), reps.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(dir / "mc" / "montecarlo_parameters.csv"));
}
