#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = ZIKQ_CLI_PATH;
const fs::path kData = ZIKQ_DATA_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("zikq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of the CLI with stdout and stderr captured to files.
  int run(const std::string& args) {
    const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + (dir_ / "stdout").string() + "\" 2> \"" +
                            (dir_ / "stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return "\"" + (dir_ / name).string() + "\""; }
  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  static std::string data(const std::string& name) { return "\"" + (kData / name).string() + "\""; }

  fs::path dir_;
};

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_F(Cli, FitThenPlotBundledCohort) {
  ASSERT_EQ(run("fit --input " + data("example_cohort.csv") + " --out-json " + path("c.json") + " --out-csv " +
                path("c.csv")),
            0);
  ASSERT_EQ(run("plot --chart " + path("c.json") + " --overlay " + data("example_cohort.csv") + " --out " +
                path("c.svg")),
            0);
  const std::string svg = read("c.svg");
  EXPECT_EQ(count(svg, "class=\"centile\""), 9u);
  EXPECT_GT(count(svg, "class=\"trajectory\""), 0u);
}

TEST_F(Cli, BenchmarkIsByteIdenticalForSeed) {
  ASSERT_EQ(run("benchmark --n 200 --replicates 2 --seed 4 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("benchmark --n 200 --replicates 2 --seed 4 --threads 3 --out " + path("b.csv")), 0);
  EXPECT_FALSE(read("a.csv").empty());
  EXPECT_EQ(read("a.csv"), read("b.csv"));
}

TEST_F(Cli, UnchangedRanksReportUnitP) {
  ASSERT_EQ(run("test-efficacy --chart " + data("example_chart.json") + " --visits " + data("efficacy_unchanged.csv") +
                " --out-json " + path("e.json")),
            0);
  const auto j = nlohmann::json::parse(read("e.json"));
  EXPECT_EQ(j["p"].get<double>(), 1.0);
  EXPECT_EQ(j["n_reduced"].get<int>(), 0);
  EXPECT_NE(read("stdout").find("one-sided p:     1"), std::string::npos);
}

TEST_F(Cli, TreatedFixtureIsSignificant) {
  ASSERT_EQ(run("test-efficacy --chart " + data("example_chart.json") + " --visits " + data("efficacy_treated.csv") +
                " --out-json " + path("e.json")),
            0);
  EXPECT_LT(nlohmann::json::parse(read("e.json"))["p"].get<double>(), 0.05);
}

TEST_F(Cli, ScreenWithConfigDefaults) {
  ASSERT_EQ(run("screen --config " + data("example_config.json") + " --chart " + data("example_chart.json") +
                " --baselines " + data("baselines.csv") + " --out " + path("s.csv") + " --report " + path("r.csv")),
            0);
  const std::string rep = read("r.csv");
  EXPECT_EQ(rep.substr(0, rep.find('\n')), "age_bin,n,rate_proposed,rate_fixed");
  EXPECT_NE(rep.find("overall,300,"), std::string::npos);
}

TEST_F(Cli, FlagOverridesConfig) {
  ASSERT_EQ(run("fit --config " + data("example_config.json") + " --input " + data("example_cohort.csv") +
                " --levels 0.5 --kernel gaussian --out-json " + path("c.json")),
            0);
  const auto j = nlohmann::json::parse(read("c.json"));
  EXPECT_EQ(j["tau_levels"].size(), 1u);
  EXPECT_EQ(j["config"]["kernel"], "gaussian");
  ASSERT_EQ(run("fit --config " + data("example_config.json") + " --input " + data("example_cohort.csv") +
                " --out-json " + path("d.json")),
            0);
  EXPECT_EQ(nlohmann::json::parse(read("d.json"))["tau_levels"].size(), 5u);
}

TEST_F(Cli, UnseededRunReportsSeed) {
  ASSERT_EQ(run("simulate --n 20 --out " + path("c.csv")), 0);
  EXPECT_NE(read("stderr").find("seed: "), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("fit --input " + path("missing.csv") + " --out-csv " + path("x.csv")), 3);
  EXPECT_NE(read("stderr").find("\"error\":\"data-error\""), std::string::npos);
  EXPECT_EQ(run("fit --input " + data("example_cohort.csv") + " --out-csv " + path("x.csv") + " --c0 -2"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("rank --chart " + data("example_chart.json") + " --visits " + data("efficacy_treated.csv") +
                " --out " + path("r.csv")),
            3);  // wrong header
}

TEST_F(Cli, RankOutOfRangeAge) {
  std::ofstream(dir_ / "v.csv") << "subject_id,age,score\nz,40,3\n";
  EXPECT_EQ(run("rank --chart " + data("example_chart.json") + " --visits " + path("v.csv") + " --out " +
                path("r.csv")),
            3);
  EXPECT_NE(read("stderr").find("out-of-range"), std::string::npos);
}
