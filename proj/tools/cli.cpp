#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metaems/config.hpp"
#include "metaems/errors.hpp"
#include "metaems/harness.hpp"
#include "metaems/seeding.hpp"
#include "metaems/simulator.hpp"

namespace metaems::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output;
  int verbosity = 0;
  int jobs = 0;
};

void AddCommon(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("-c,--config", c.config_path, "Experiment config file (INI)");
  if (needs_config) opt->required();
  cmd->add_option("--set", c.overrides, "Override a config key: section.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Master seed (overrides experiment.master_seed)");
  cmd->add_option("-o,--output", c.output, "Output directory (fallback: METAEMS_OUTPUT_DIR, experiment.output_dir)");
  cmd->add_flag("-v,--verbose", c.verbosity, "Print progress to stderr");
  cmd->add_option("-j,--jobs", c.jobs, "Parallel (zone, seed) jobs; default = number of zones");
}

config::ExperimentConfig LoadConfig(const Common& c) {
  auto flat = config::ReadFlatConfig(c.config_path);
  auto overrides = c.overrides;
  if (c.seed) overrides.push_back("experiment.master_seed=" + std::to_string(*c.seed));
  config::ApplyOverrides(flat, overrides);
  auto cfg = config::FromFlat(flat);
  return cfg;
}

fs::path ResolveOutput(const Common& c, const config::ExperimentConfig* cfg) {
  if (!c.output.empty()) return c.output;
  if (const char* env = std::getenv("METAEMS_OUTPUT_DIR"); env && *env) return env;
  if (cfg && !cfg->output_dir.empty()) return cfg->output_dir;
  throw ConfigError("no output directory: pass --output, set METAEMS_OUTPUT_DIR or experiment.output_dir");
}

harness::RunOptions MakeOptions(const Common& c, const config::ExperimentConfig& cfg, std::ostream& err) {
  harness::RunOptions opt;
  opt.jobs = c.jobs > 0 ? c.jobs : static_cast<int>(cfg.zones.size());
  if (c.verbosity > 0) opt.log = [&err](const std::string& msg) { err << msg << std::endl; };
  return opt;
}

int RunAndWrite(const Common& c, harness::RunOptions opt, std::ostream& out, std::ostream& err) {
  auto cfg = LoadConfig(c);
  const fs::path dir = ResolveOutput(c, &cfg);
  cfg.output_dir = dir.string();
  const auto common = MakeOptions(c, cfg, err);
  opt.jobs = common.jobs;
  opt.log = common.log;
  const auto record = harness::RunExperiment(cfg, opt);
  harness::WriteRunOutputs(dir, record, cfg);
  out << harness::FormatRunSummary(record, cfg);
  out << "outputs written to " << dir.string() << "\n";
  return 0;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-reinforcement learning for building energy management"};
  app.require_subcommand(1);
  app.footer(config::DescribeKeys());

  Common train_c, test_c, base_c, full_c;
  auto* train = app.add_subcommand("meta-train", "Meta-train the shared initialization for every zone and seed");
  AddCommon(train, train_c);

  auto* test = app.add_subcommand("meta-test", "Adapt saved initializations on the target buildings");
  AddCommon(test, test_c);
  std::string checkpoint_dir;
  test->add_option("--checkpoints", checkpoint_dir, "Directory with metaems_zone*_seed*.ckpt files")->required();

  auto* base = app.add_subcommand("baseline", "Run baselines on the target buildings");
  AddCommon(base, base_c);
  std::vector<std::string> method_names;
  base->add_option("-m,--method", method_names,
                   "no_control | rbc | random_init | pretrained | maml | rl_mpc (repeatable)")
      ->required();

  auto* full = app.add_subcommand("full-experiment", "Meta-train, meta-test and run every enabled baseline");
  AddCommon(full, full_c);

  auto* gen = app.add_subcommand("gen-traces", "Write synthetic zone traces as CSV");
  std::vector<int> gen_zones{1, 2, 3, 4};
  int gen_length = 8760;
  std::uint64_t gen_seed = 1;
  double gen_solar = 1.0;
  std::string gen_out, gen_table;
  gen->add_option("--zone", gen_zones, "Zone ids (repeatable)")->capture_default_str();
  gen->add_option("--length", gen_length, "Hours per trace")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Seed")->capture_default_str();
  gen->add_option("--solar-scale", gen_solar, "Installed solar multiplier")->capture_default_str();
  gen->add_option("--zone-table", gen_table, "Zone parameter table (INI); default built-in");
  gen->add_option("-o,--output", gen_out, "Output directory (fallback: METAEMS_OUTPUT_DIR)");

  auto* report = app.add_subcommand("report", "Print the tables of a finished run");
  std::string run_dir;
  report->add_option("run_dir", run_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (*train) {
      harness::RunOptions opt;
      opt.methods = std::vector<harness::Method>{harness::Method::kMetaems};
      opt.train_only = true;
      return RunAndWrite(train_c, opt, out, err);
    }
    if (*test) {
      harness::RunOptions opt;
      opt.methods = std::vector<harness::Method>{harness::Method::kRbc, harness::Method::kMetaems};
      opt.metaems_checkpoint_dir = checkpoint_dir;
      return RunAndWrite(test_c, opt, out, err);
    }
    if (*base) {
      std::vector<harness::Method> methods{harness::Method::kRbc};
      for (const auto& name : method_names) {
        const auto m = harness::ParseMethod(name);
        if (m == harness::Method::kMetaems) throw ConfigError("use meta-train/meta-test for metaems");
        if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
      }
      std::vector<harness::Method> ordered;
      for (auto m : harness::kAllMethods) {
        if (std::find(methods.begin(), methods.end(), m) != methods.end()) ordered.push_back(m);
      }
      harness::RunOptions opt;
      opt.methods = ordered;
      return RunAndWrite(base_c, opt, out, err);
    }
    if (*full) return RunAndWrite(full_c, {}, out, err);
    if (*gen) {
      Common c;
      c.output = gen_out;
      const fs::path dir = ResolveOutput(c, nullptr);
      if (gen_length < 1) throw ConfigError("--length must be positive");
      const auto profiles = gen_table.empty() ? sim::DefaultZoneProfiles() : sim::LoadZoneProfiles(gen_table);
      fs::create_directories(dir);
      for (int z : gen_zones) {
        if (z < 1 || z > sim::kNumZones) throw ConfigError("--zone " + std::to_string(z) + " not in 1..4");
        Rng rng = MakeRng(gen_seed, "gen-traces", {static_cast<std::uint64_t>(z)});
        const auto trace = sim::GenerateTrace(profiles[static_cast<std::size_t>(z - 1)], gen_length, rng, gen_solar);
        const fs::path path = dir / ("zone" + std::to_string(z) + "_seed" + std::to_string(gen_seed) + ".csv");
        sim::WriteTraceCsv(path, trace);
        out << path.string() << "\n";
      }
      return 0;
    }
    if (*report) {
      const fs::path dir = run_dir;
      out << ReadText(dir / "run_summary.txt") << "\n";
      if (fs::exists(dir / "breakdown.csv")) out << "normalized metrics (RBC = 1)\n" << ReadText(dir / "breakdown.csv");
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace metaems::cli
