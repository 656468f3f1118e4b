#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metaems/agent.hpp"
#include "metaems/baselines.hpp"
#include "metaems/meta.hpp"
#include "metaems/simulator.hpp"

namespace metaems::config {

// One documented configuration key.
struct KeySpec {
  std::string key;
  std::string default_value;
  std::string description;
};

const std::vector<KeySpec>& KeyTable();

// Help text listing every key with its default.
std::string DescribeKeys();

enum class BuildingSampling { kCatalog, kResample };

struct MethodToggles {
  bool no_control = true;
  bool rbc = true;
  bool random_init = true;
  bool pretrained = true;
  bool maml = true;
  bool rl_mpc = true;
  bool metaems = true;
};

struct PretrainedConfig {
  int pool_size = 0;  // 0 = one model per source building
  int episodes = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t master_seed = 1;
  int n_repeat_seeds = 5;
  std::vector<int> zones{1, 2, 3, 4};
  std::string zone_table;  // empty = built-in table
  std::string rbc_table;   // empty = built-in table
  int n_source_buildings = 8;
  int n_target_buildings = 3;
  int episode_length = 8760;
  int test_episodes = 1;
  BuildingSampling building_sampling = BuildingSampling::kCatalog;
  sim::BuildingRanges ranges;
  sim::BuildingConfig building_defaults;
  MethodToggles methods;
  meta::MetaConfig meta;
  agent::AgentConfig agent;
  sim::RewardConfig reward;
  baselines::MamlConfig maml;
  PretrainedConfig pretrained;
  baselines::RlMpcConfig rl_mpc;
  std::string output_dir;

  // Throws ConfigError on violated invariants.
  void Validate() const;
};

// Flat key -> value view of a config, in KeyTable order for every key.
using FlatConfig = std::map<std::string, std::string>;

// Parses an INI file into flat keys. Unknown keys are a ConfigError.
FlatConfig ReadFlatConfig(const std::filesystem::path& path);
FlatConfig ParseFlatConfig(std::string_view text, std::string_view origin = "<string>");

// Applies `key=value` overrides in order.
void ApplyOverrides(FlatConfig& flat, const std::vector<std::string>& overrides);

ExperimentConfig FromFlat(const FlatConfig& flat);
FlatConfig ToFlat(const ExperimentConfig& cfg);

// Resolved config as INI text; re-parsing it yields the same config.
std::string ToIni(const ExperimentConfig& cfg);

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::string FormatDouble(double v);

}  // namespace metaems::config
