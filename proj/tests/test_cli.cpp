#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Json base_config(const std::string& name) {
  return Json::parse(slurp(fs::path(DUALITY_BENCH_CONFIGS) / name));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("duality_bench_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(Json j, const std::string& name = "config.json") {
    j["output"].erase("directory");
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Exit status of the tool; stderr and stdout land in dir_/log.txt.
  int run(const std::string& cmd, const fs::path& config, const fs::path& out,
          const std::string& extra = "", const std::string& env = "") {
    const std::string line = env + " \"" DUALITY_BENCH_EXE "\" " + cmd + " --config \"" +
                             config.string() + "\"" +
                             (out.empty() ? "" : " --out \"" + out.string() + "\"") + " " +
                             extra + " > \"" + (dir_ / "log.txt").string() + "\" 2>&1";
    const int st = std::system(line.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }
  std::string log() const { return slurp(dir_ / "log.txt"); }

  fs::path dir_;
};

Json small_gaussian() {
  Json j = base_config("bivariate_rho05.json");
  j["gibbs"]["n_cycles"] = 10000;
  j["gibbs"]["burn_in"] = 1000;
  j["diagnostics"]["grid_points"] = 1025;
  j["diagnostics"]["tensor_points"] = 257;
  j["diagnostics"]["property_samples"] = 10;
  j["diagnostics"]["concavity_samples"] = 10;
  j["diagnostics"]["duality_trials"] = 10;
  return j;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_F(Cli, RunGibbsWritesTraceAndIsReproducible) {
  const auto cfg = write_config(small_gaussian());
  ASSERT_EQ(run("run-gibbs", cfg, dir_ / "a"), 0) << log();
  ASSERT_EQ(run("run-gibbs", cfg, dir_ / "b"), 0) << log();
  const auto trace = slurp(dir_ / "a" / "trace.csv");
  EXPECT_EQ(line_count(trace), 1u + 9000u);
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "cycle,block1_dim1,block2_dim1");
  EXPECT_EQ(trace, slurp(dir_ / "b" / "trace.csv"));
  const auto est = Json::parse(slurp(dir_ / "a" / "estimates.json"));
  EXPECT_EQ(est["coordinates"].size(), 2u);
  EXPECT_NEAR(est["correlation"][0][1].get<double>(), 0.5, 0.1);
}

TEST_F(Cli, SeedOverrideChangesTrace) {
  const auto cfg = write_config(small_gaussian());
  ASSERT_EQ(run("run-gibbs", cfg, dir_ / "a"), 0);
  ASSERT_EQ(run("run-gibbs", cfg, dir_ / "b", "--seed 99"), 0);
  EXPECT_NE(slurp(dir_ / "a" / "trace.csv"), slurp(dir_ / "b" / "trace.csv"));
}

TEST_F(Cli, ParallelChainsWriteOneTraceEach) {
  const auto cfg = write_config(small_gaussian());
  ASSERT_EQ(run("run-gibbs", cfg, dir_ / "a", "--parallel-chains 3"), 0) << log();
  for (int k = 1; k <= 3; ++k) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / ("trace_chain" + std::to_string(k) + ".csv")));
  }
  EXPECT_EQ(Json::parse(slurp(dir_ / "a" / "estimates.json"))["chains"].size(), 3u);
}

TEST_F(Cli, MissingCovarianceIsConfigError) {
  Json j = small_gaussian();
  j["model"].erase("covariance");
  EXPECT_EQ(run("run-gibbs", write_config(j), dir_ / "a"), 2);
  EXPECT_NE(log().find("model.covariance"), std::string::npos) << log();
}

TEST_F(Cli, MalformedJsonIsConfigError) {
  const fs::path p = dir_ / "bad.json";
  std::ofstream(p) << "{ \"config_version\": 1, ";
  EXPECT_EQ(run("run-cavi", p, dir_ / "a"), 2);
}

TEST_F(Cli, NonPositiveDefiniteCovarianceIsModelError) {
  Json j = small_gaussian();
  j["model"]["covariance"] = {{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_EQ(run("run-gibbs", write_config(j), dir_ / "a"), 3);
}

TEST_F(Cli, RunCaviWritesConvergedState) {
  const auto cfg = write_config(small_gaussian());
  ASSERT_EQ(run("run-cavi", cfg, dir_ / "a"), 0) << log();
  const auto s = Json::parse(slurp(dir_ / "a" / "state.json"));
  EXPECT_TRUE(s["converged"].get<bool>());
  for (const auto& f : s["factors"]) {
    EXPECT_NEAR(f["covariance"][0][0].get<double>(), 0.75, 1e-9);
  }
}

TEST_F(Cli, CaviNonConvergenceStillSucceeds) {
  Json j = small_gaussian();
  j["model"]["covariance"] = {{1.0, 0.9}, {0.9, 1.0}};
  j["cavi"]["max_cycles"] = 1;
  ASSERT_EQ(run("run-cavi", write_config(j), dir_ / "a"), 0) << log();
  EXPECT_FALSE(Json::parse(slurp(dir_ / "a" / "state.json"))["converged"].get<bool>());
}

TEST_F(Cli, NonPositiveToleranceIsConfigError) {
  Json j = small_gaussian();
  j["cavi"]["tolerance"] = 0.0;
  EXPECT_EQ(run("run-cavi", write_config(j), dir_ / "a"), 2);
  EXPECT_NE(log().find("cavi.tolerance"), std::string::npos);
}

TEST_F(Cli, DiagnosePassesOnBothConfigs) {
  EXPECT_EQ(run("diagnose", write_config(small_gaussian()), dir_ / "g"), 0) << log();
  EXPECT_TRUE(fs::exists(dir_ / "g" / "report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "g" / "report.csv"));
  Json d = base_config("discrete_2x2.json");
  d["gibbs"]["n_cycles"] = 5000;
  EXPECT_EQ(run("diagnose", write_config(d, "d.json"), dir_ / "d"), 0) << log();
  const auto rep = Json::parse(slurp(dir_ / "d" / "report.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
}

TEST_F(Cli, CorruptedStateFailsSquashCheck) {
  ASSERT_EQ(run("run-cavi", write_config(small_gaussian()), dir_), 0);
  Json s = Json::parse(slurp(dir_ / "state.json"));
  s["factors"][0]["covariance"][0][0] = 2.0;
  std::ofstream(dir_ / "state.json") << s.dump(2);
  Json j = small_gaussian();
  j["diagnostics"]["state_file"] = "state.json";
  EXPECT_EQ(run("diagnose", write_config(j), dir_ / "r"), 1);
  EXPECT_NE(log().find("squash_pointwise[block1]"), std::string::npos) << log();
}

TEST_F(Cli, VerifyDuality) {
  const auto cfg = write_config(small_gaussian());
  ASSERT_EQ(run("verify-duality", cfg, dir_ / "a"), 0) << log();
  ASSERT_EQ(run("verify-duality", cfg, dir_ / "b"), 0);
  const auto gaps = slurp(dir_ / "a" / "gaps.csv");
  EXPECT_EQ(gaps, slurp(dir_ / "b" / "gaps.csv"));
  EXPECT_EQ(line_count(gaps), 1u + 2u * 10u);
  Json j = small_gaussian();
  j["diagnostics"]["duality_trials"] = 0;
  EXPECT_EQ(run("verify-duality", write_config(j, "zero.json"), dir_ / "c"), 2);
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const auto cfg = write_config(small_gaussian());
  const fs::path env_dir = dir_ / "from_env";
  ASSERT_EQ(run("run-cavi", cfg, {}, "", "DUALITY_BENCH_OUT=\"" + env_dir.string() + "\""), 0)
      << log();
  EXPECT_TRUE(fs::exists(env_dir / "state.json"));
}

TEST_F(Cli, UnknownOptionIsUsageError) {
  EXPECT_EQ(run("run-gibbs", write_config(small_gaussian()), dir_, "--bogus"), 2);
}
