#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "platoon_cli_test";

int cli(const std::string& args) {
  const std::string cmd = std::string(PLATOON_CLI) + " " + args + " >" + (kDir / "stdout").string() +
                          " 2>" + (kDir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string outputs(const std::string& stem) {
  return "--csv " + (kDir / (stem + ".csv")).string() + " --report " +
         (kDir / (stem + ".json")).string();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
  static void TearDownTestSuite() { fs::remove_all(kDir); }
};

}  // namespace

TEST_F(Cli, PresetNashSucceeds) {
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy nash " + outputs("nash")), 0);
  EXPECT_TRUE(fs::exists(kDir / "nash.csv"));
}

TEST_F(Cli, PrintedTrajectoryFormReportsCollision) {
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy nash --trajectory-form printed " +
                outputs("printed")),
            2);
  EXPECT_NE(slurp(kDir / "stderr").find("follower 1"), std::string::npos);
  EXPECT_TRUE(fs::exists(kDir / "printed.json"));
}

TEST_F(Cli, TimeVaryingCollisionFree) {
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy ca-timevarying " + outputs("tv")), 0);
}

TEST_F(Cli, VerifyFoldsFailuresIntoExitCode) {
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy nash --verify " + outputs("v1")), 0);
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy ca-timevarying --verify " + outputs("v2")), 3);
}

TEST_F(Cli, OptionsOverrideScenario) {
  ASSERT_EQ(cli("run --scenario " PLATOON_SCENARIO_DIR "/paper_sec5.cfg --strategy ca-terminal "
                "--dt-output 0.5 --dt-oracle 0.002 --epsilon 0.3 " +
                outputs("override")),
            0);
  const std::string json = slurp(kDir / "override.json");
  EXPECT_NE(json.find("\"epsilon\": 0.3"), std::string::npos);
  EXPECT_NE(json.find("\"dt_oracle\": 0.002"), std::string::npos);
  std::istringstream csv(slurp(kDir / "override.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 1 + 21);
}

TEST_F(Cli, PlotScriptEmitted) {
  ASSERT_EQ(cli("run --scenario paper-sec5 --strategy nash --emit-plot-script " +
                (kDir / "plot.py").string() + " " + outputs("plot")),
            0);
  EXPECT_NE(slurp(kDir / "plot.py").find("plot.csv"), std::string::npos);
}

TEST_F(Cli, IoFailures) {
  EXPECT_EQ(cli("run --scenario " + (kDir / "absent.cfg").string() + " --strategy nash " +
                outputs("absent")),
            4);
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy nash --csv " +
                (kDir / "no" / "such" / "dir.csv").string() + " --report " +
                (kDir / "r.json").string()),
            4);
}

TEST_F(Cli, UsageAndScenarioErrors) {
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy greedy " + outputs("u1")), 1);
  EXPECT_EQ(cli("run --strategy nash " + outputs("u2")), 1);
  EXPECT_EQ(cli("run --scenario paper-sec5 --strategy nash --epsilon 0 " + outputs("u3")), 1);
  {
    std::ofstream bad(kDir / "bad.cfg");
    bad << "leader = 23 2\nfollower = 30 2 0 1 2 1 1\n";
  }
  EXPECT_EQ(cli("run --scenario " + (kDir / "bad.cfg").string() + " --strategy nash " +
                outputs("u4")),
            1);
  EXPECT_NE(slurp(kDir / "stderr").find("strictly decrease"), std::string::npos);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  for (const char* s : {"nash", "ca-terminal", "ca-timevarying", "ca-timevarying-consistent"}) {
    const std::string base = std::string("run --scenario paper-sec5 --strategy ") + s + " ";
    cli(base + outputs("a"));
    cli(base + outputs("b"));
    EXPECT_EQ(slurp(kDir / "a.csv"), slurp(kDir / "b.csv")) << s;
    EXPECT_EQ(slurp(kDir / "a.json"), slurp(kDir / "b.json")) << s;
  }
}
