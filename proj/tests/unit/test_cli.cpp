#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "metaems/config.hpp"
#include "support/small_run.hpp"

namespace fs = std::filesystem;
using namespace metaems;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "metaems");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path TempDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("metaems_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path WriteSmallConfig(const fs::path& dir) {
  const auto path = dir / "small.cfg";
  std::ofstream(path) << config::ToIni(metaems::testing::SmallRunConfig());
  return path;
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(RunCli({}).code, 1); }

TEST(Cli, HelpListsEveryConfigKey) {
  const auto r = RunCli({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const auto& k : config::KeyTable()) EXPECT_NE(r.out.find(k.key), std::string::npos) << k.key;
  for (const char* sub : {"meta-train", "meta-test", "baseline", "full-experiment", "gen-traces", "report"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, MissingConfigNamesPath) {
  const auto r = RunCli({"full-experiment", "-c", "/no/such/file.cfg", "-o", "/tmp/unused"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/no/such/file.cfg"), std::string::npos);
}

TEST(Cli, UnknownOverrideKeyIsConfigError) {
  const auto dir = TempDir("badkey");
  const auto r = RunCli({"baseline", "-c", WriteSmallConfig(dir).string(), "-m", "no_control", "--set",
                         "meta.nope=1", "-o", (dir / "out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("meta.nope"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MissingOutputDirectoryIsConfigError) {
  const auto dir = TempDir("noout");
  unsetenv("METAEMS_OUTPUT_DIR");
  const auto r = RunCli({"baseline", "-c", WriteSmallConfig(dir).string(), "-m", "no_control"});
  EXPECT_EQ(r.code, 1);
  fs::remove_all(dir);
}

TEST(Cli, OverrideReachesResolvedConfig) {
  const auto dir = TempDir("override");
  const auto out = dir / "out";
  const auto r = RunCli({"baseline", "-c", WriteSmallConfig(dir).string(), "-m", "no_control", "--set",
                         "meta.t_theta=20", "--seed", "7", "-o", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto resolved = config::LoadExperimentConfig(out / "resolved.cfg");
  EXPECT_EQ(resolved.meta.t_theta, 20);
  EXPECT_EQ(resolved.master_seed, 7u);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  fs::remove_all(dir);
}

TEST(Cli, BaselineRejectsMetaems) {
  const auto dir = TempDir("reject");
  const auto r = RunCli({"baseline", "-c", WriteSmallConfig(dir).string(), "-m", "metaems", "-o",
                         (dir / "out").string()});
  EXPECT_EQ(r.code, 1);
  fs::remove_all(dir);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = TempDir("envout");
  setenv("METAEMS_OUTPUT_DIR", (dir / "env").c_str(), 1);
  const auto r = RunCli({"baseline", "-c", WriteSmallConfig(dir).string(), "-m", "no_control"});
  unsetenv("METAEMS_OUTPUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "env" / "summary.csv"));
  fs::remove_all(dir);
}

TEST(Cli, GenTracesWritesHeaderAndLength) {
  const auto dir = TempDir("traces");
  const auto r = RunCli({"gen-traces", "--zone", "2", "--length", "48", "--seed", "3", "-o", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "zone2_seed3.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "hour,renewable_kw,load_kw,outdoor_c,price");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 48);
  EXPECT_EQ(RunCli({"gen-traces", "--zone", "5", "-o", dir.string()}).code, 1);
  fs::remove_all(dir);
}

TEST(Cli, TrainThenTestThenReport) {
  const auto dir = TempDir("pipeline");
  const auto cfg = WriteSmallConfig(dir).string();
  const auto train = RunCli({"meta-train", "-c", cfg, "-o", (dir / "train").string()});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(fs::exists(dir / "train" / "checkpoints" / "metaems_zone1_seed0.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "train" / "training_log.csv"));

  const auto test = RunCli({"meta-test", "-c", cfg, "--checkpoints", (dir / "train" / "checkpoints").string(), "-o",
                            (dir / "test").string()});
  ASSERT_EQ(test.code, 0) << test.err;
  EXPECT_TRUE(fs::exists(dir / "test" / "summary.csv"));

  const auto report = RunCli({"report", (dir / "test").string()});
  EXPECT_EQ(report.code, 0);
  EXPECT_NE(report.out.find("metaems"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MetaTestWithoutCheckpointsFailsAtRuntime) {
  const auto dir = TempDir("nockpt");
  const auto r = RunCli({"meta-test", "-c", WriteSmallConfig(dir).string(), "--checkpoints",
                         (dir / "none").string(), "-o", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  fs::remove_all(dir);
}
