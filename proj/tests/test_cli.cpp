#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "support/fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with the given arguments; stderr is merged into `out`.
Result cli(const std::string& args) {
  std::string cmd = std::string("cd ") + DYNWIRE_SOURCE_DIR + " && " + DYNWIRE_CLI + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dynwire_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }
  static std::string golden(const std::string& name) { return dynwire::io::read_file(fixtures::golden_path(name)); }

  fs::path dir_;
};

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_F(Cli, CheckPassesBundledModels) {
  auto r = cli("check models/sir.stockflow.json models/fibonacci.wiring.json models/fig2.wiring.json "
               "models/feedback.wiring.json models/sir.scenario.json models/coflow.scenario.json "
               "models/water.stockflow.json models/pollutant.stockflow.json models/fib_a.mealy.json");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_FALSE(contains(r.out, "fail"));
}

TEST_F(Cli, CheckReportsCycle) {
  auto r = cli("check models/loop.wiring.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(contains(r.out, "cycle of length 4")) << r.out;
}

TEST_F(Cli, CheckMissingFileIsAnError) {
  auto r = cli("check does/not/exist.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.out, "cannot open")) << r.out;
}

TEST_F(Cli, DepsWithOracle) {
  auto r = cli("deps models/fig2.wiring.json --oracle");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "in1 -> out1\nin1 -> out3\nin2 -> out3\noracle: agrees\n");
}

TEST_F(Cli, JsonFormatFromFlagOrEnvironment) {
  auto flag = cli("--format json deps models/fig2.wiring.json");
  ASSERT_EQ(flag.code, 0) << flag.out;
  auto j = dynwire::io::Json::parse(flag.out);
  EXPECT_EQ(j["pairs"].size(), 3u);
  EXPECT_TRUE(j["acyclic"].get<bool>());
  ::setenv("DYNWIRE_FORMAT", "json", 1);
  auto env = cli("deps models/fig2.wiring.json");
  ::unsetenv("DYNWIRE_FORMAT");
  EXPECT_EQ(env.out, flag.out);
  EXPECT_NE(cli("deps models/fig2.wiring.json").out, flag.out);
}

TEST_F(Cli, ComposeFibonacciMatchesGolden) {
  auto out = tmp("fib.json");
  auto r = cli("compose models/fibonacci.wiring.json models/fib_a.mealy.json models/fib_b.mealy.json -o " + out);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(dynwire::io::read_file(out), golden("fibonacci.composite.mealy.json"));
  auto run = cli("run-discrete " + out + " --steps 10 --init 1,0");
  ASSERT_EQ(run.code, 0) << run.out;
  EXPECT_TRUE(contains(run.out, "\n9,55,34\n")) << run.out;
}

TEST_F(Cli, ComposeRejectsCyclicWiring) {
  auto r = cli("compose models/loop.wiring.json models/loop_a.mealy.json models/loop_b.mealy.json -o " + tmp("x.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(contains(r.out, "cycle of length 4"));
  EXPECT_FALSE(fs::exists(tmp("x.json")));
}

TEST_F(Cli, ComposeChecksModelCount) {
  auto r = cli("compose models/fibonacci.wiring.json models/fib_a.mealy.json -o " + tmp("x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.out, "2 box(es) but 1 model(s)"));
}

TEST_F(Cli, ComposeStockFlowThenSimulate) {
  auto out = tmp("coflow.json");
  auto r = cli("compose models/coflow_a.wiring.json models/water.stockflow.json models/pollutant.stockflow.json -o " +
               out);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(dynwire::io::read_file(out), dynwire::io::read_file(fixtures::model_path("coflow_a.stockflow.json")));
  auto sim = cli("simulate models/coflow.scenario.json --t1 1 --dt 0.5");
  EXPECT_EQ(sim.code, 0) << sim.out;
  EXPECT_EQ(sim.out.substr(0, sim.out.find('\n')), "t,W.water,P.P,conc");
}

TEST_F(Cli, ToMealyMatchesGolden) {
  auto out = tmp("sir.json");
  ASSERT_EQ(cli("to-mealy models/sir.stockflow.json -o " + out).code, 0);
  EXPECT_EQ(dynwire::io::read_file(out), golden("sir.mealy.json"));
}

TEST_F(Cli, SimulateMatchesGolden) {
  auto out = tmp("sir.csv");
  auto r = cli("simulate models/sir.scenario.json --t1 1 --dt 0.25 -o " + out);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(dynwire::io::read_file(out), golden("sir_short.csv"));
}

TEST_F(Cli, SimulateRejectsBadStep) {
  EXPECT_EQ(cli("simulate models/sir.scenario.json --dt 0").code, 2);
  EXPECT_EQ(cli("simulate models/sir.scenario.json --dt -1").code, 2);
  EXPECT_EQ(cli("simulate models/sir.scenario.json --method leapfrog").code, 2);
}

TEST_F(Cli, ExportDotMatchesGolden) {
  auto r = cli("export-dot models/fig2.wiring.json");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, golden("fig2.dot"));
  auto out = tmp("sir.dot");
  ASSERT_EQ(cli("export-dot models/sir.stockflow.json -o " + out).code, 0);
  EXPECT_EQ(dynwire::io::read_file(out), golden("sir.dot"));
}

TEST_F(Cli, RunDiscreteWithInputCsv) {
  auto csv = tmp("in.csv");
  dynwire::io::write_file(csv, "x1,x2\n1,2\n3,4\n");
  auto r = cli("run-discrete models/feedback.mealy.json --inputs " + csv);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out, "step,y1,y2\n0,2,4\n1,4,8\n2,,\n");
  auto missing = cli("run-discrete models/fib_a.mealy.json --steps 2");
  EXPECT_EQ(missing.code, 2);
}

TEST_F(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_NE(cli("frobnicate").code, 0);
  EXPECT_NE(cli("").code, 0);
}
