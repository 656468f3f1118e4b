#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metaems/baselines.hpp"
#include "metaems/config.hpp"
#include "metaems/meta.hpp"
#include "metaems/metrics.hpp"
#include "metaems/simulator.hpp"

namespace metaems::harness {

inline constexpr std::string_view kArtifactVersion = "metaems 1.0.0";

enum class Method { kNoControl, kRbc, kRandomInit, kPretrained, kMaml, kRlMpc, kMetaems };
inline constexpr std::array<Method, 7> kAllMethods{Method::kNoControl, Method::kRbc,   Method::kRandomInit,
                                                   Method::kPretrained, Method::kMaml,  Method::kRlMpc,
                                                   Method::kMetaems};

std::string_view MethodName(Method m);
// Throws ConfigError for an unknown name.
Method ParseMethod(std::string_view name);
std::vector<Method> EnabledMethods(const config::MethodToggles& toggles);

std::array<sim::ZoneProfile, sim::kNumZones> ResolveZoneProfiles(const config::ExperimentConfig& cfg);
baselines::RbcRuleTable ResolveRbcTable(const config::ExperimentConfig& cfg);

struct ZoneBuildings {
  int zone = 1;
  std::vector<sim::BuildingSpec> sources;
  std::vector<sim::BuildingSpec> targets;
};

// Catalog mode draws one building set per zone; resample mode draws a new
// set for every repeat. Sources and targets never share a draw.
ZoneBuildings BuildZoneBuildings(const config::ExperimentConfig& cfg, const sim::ZoneProfile& profile, int repeat);

// Seed of one (zone, repeat) job; every method stream derives from it.
std::uint64_t JobSeed(std::uint64_t master_seed, int zone, int repeat);
// Shared by all learning methods on the targets so exploration noise and
// minibatch draws start from the same streams.
std::uint64_t EvaluationSeed(std::uint64_t job_seed);

struct BuildingScore {
  std::string building;
  metrics::ScoreReport raw;
  metrics::ScoreReport normalized;  // by the RBC score of the same building
  double cost_percent = 0.0;
};

struct MethodResult {
  Method method = Method::kRbc;
  // [building][episode]
  std::vector<std::vector<meta::EpisodeRecord>> episodes;
  // Scores of the first test episode.
  std::vector<BuildingScore> buildings;
  BuildingScore district;
  double avg_cost_percent = 0.0;
  std::vector<double> avg_cost_percent_per_episode;
  std::vector<double> episode_rewards;  // mean over buildings
};

struct JobResult {
  int zone = 1;
  int repeat = 0;
  std::vector<MethodResult> methods;
  std::optional<meta::MetaState> metaems_state;
  std::optional<meta::MetaState> maml_state;
  meta::MetaTrainStats metaems_stats;
  baselines::MamlStats maml_stats;
  std::vector<meta::TrainLogRow> training_log;

  const MethodResult* Find(Method m) const;
};

struct ZoneMethodSummary {
  int zone = 1;
  std::string zone_name;
  Method method = Method::kRbc;
  int seeds = 0;
  double avg_cost_mean = 0.0;
  double avg_cost_std = 0.0;  // sample std over repeats
  metrics::ScoreReport normalized;           // mean over buildings and repeats
  metrics::ScoreReport district_normalized;  // mean over repeats
  std::vector<double> episode_rewards;       // mean over buildings and repeats
  std::vector<double> accumulated_rewards;   // running mean of episode_rewards
  std::vector<double> daily_consumption;     // district, first episode, mean over repeats
};

struct RunRecord {
  std::string config_hash;
  std::string artifact_version{kArtifactVersion};
  std::vector<Method> methods;
  std::vector<JobResult> jobs;
  std::vector<ZoneMethodSummary> summaries;
  double wall_clock_seconds = 0.0;

  const ZoneMethodSummary* Find(int zone, Method m) const;
};

struct RunOptions {
  int jobs = 1;
  std::function<void(const std::string&)> log;
  // Overrides the config toggles when set.
  std::optional<std::vector<Method>> methods;
  // Load MetaEMS initializations from `<dir>/metaems_zone{z}_seed{r}.ckpt`
  // instead of meta-training.
  std::filesystem::path metaems_checkpoint_dir;
  // Meta-train only; no target evaluation.
  bool train_only = false;
};

// Scores one method against RBC records of the same buildings.
MethodResult ScoreMethod(Method method, std::vector<std::vector<meta::EpisodeRecord>> episodes,
                         const std::vector<std::vector<meta::EpisodeRecord>>& rbc,
                         const std::vector<sim::BuildingSpec>& targets);

JobResult RunJob(const config::ExperimentConfig& cfg, const sim::ZoneProfile& profile,
                 const baselines::RbcRuleTable& rbc_table, int repeat, const std::vector<Method>& methods,
                 const RunOptions& options = {});

std::vector<ZoneMethodSummary> Summarize(const config::ExperimentConfig& cfg, const std::vector<JobResult>& jobs,
                                         const std::vector<Method>& methods);

RunRecord RunExperiment(const config::ExperimentConfig& cfg, const RunOptions& options = {});

std::string ConfigHash(const config::ExperimentConfig& cfg);

std::string CheckpointName(std::string_view method, int zone, int repeat);

// File writers. All CSVs are pure functions of the record except the run
// summary, which carries the wall-clock time.
void WriteSummaryCsv(const std::filesystem::path& path, const RunRecord& record);
void WriteBreakdownCsv(const std::filesystem::path& path, const RunRecord& record);
void WriteBuildingsCsv(const std::filesystem::path& path, const RunRecord& record);
void WriteTrainingLogCsv(const std::filesystem::path& path, const RunRecord& record);
void WriteCheckpoints(const std::filesystem::path& dir, const RunRecord& record);
// Wide CSV `zone,series,index,<method>...`: accumulated_reward per episode
// and daily_consumption per day.
void EmitLearningCurves(const std::filesystem::path& path, const RunRecord& record);
std::string FormatRunSummary(const RunRecord& record, const config::ExperimentConfig& cfg);

// Writes every output file plus the resolved config into `dir`.
void WriteRunOutputs(const std::filesystem::path& dir, const RunRecord& record, const config::ExperimentConfig& cfg);

// Improvement of `candidate` over the best (lowest) baseline in percent, or
// nullopt when some baseline is at least as good.
std::optional<double> ImprovementOverBest(double candidate, const std::vector<double>& baselines);

}  // namespace metaems::harness
