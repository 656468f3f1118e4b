#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "metaems/agent.hpp"
#include "metaems/meta.hpp"
#include "metaems/neuralnet.hpp"
#include "metaems/simulator.hpp"

namespace metaems::baselines {

// HVAC command that moves the indoor temperature toward the nearest edge of
// the comfort band, ignoring drift; zero inside the band.
double ThermostatCommand(double indoor_temp_c, const sim::BuildingConfig& cfg);

sim::Action NoControlPolicy(const sim::BuildingEnv& env);

struct RbcRuleTable {
  std::array<sim::Action, 24> entries{};

  // Night charge (22:00-07:59) at +0.5, day discharge (09:00-21:59) sized so
  // that the daily discharge total matches the charge total.
  static RbcRuleTable Default();

  // 24-row CSV `hour,esu_command,hvac_command`.
  static RbcRuleTable LoadCsv(const std::filesystem::path& path);
  void WriteCsv(const std::filesystem::path& path) const;
};

// Pure lookup on hour of day.
sim::Action RbcPolicy(int hour_of_day, const RbcRuleTable& table);

// Table ESU command; HVAC from the thermostat rule when `thermostat_hvac`.
sim::Action RbcControl(const sim::BuildingEnv& env, const RbcRuleTable& table, bool thermostat_hvac = true);

using Policy = std::function<sim::Action(const sim::BuildingEnv&)>;

// One episode under a fixed policy.
meta::EpisodeRecord RunPolicy(const sim::BuildingSpec& building, const sim::RewardConfig& reward_cfg,
                              const Policy& policy);

// Uniform pick from the pool; the result is an independent copy.
agent::ActorCritic PretrainedInit(std::span<const agent::ActorCritic> pool, Rng& rng);

struct MamlConfig {
  int epochs = 5;
};

struct MamlStats {
  std::vector<int> meta_updates_per_round;
};

// Episodic MAML baseline: per round each sampled building runs a full episode
// without learning, then trains `epochs` passes over that episode, then a
// single group-level update is applied.
MamlStats MamlEpisodicTrain(meta::MetaState& meta, std::span<const sim::BuildingSpec> sources,
                            const meta::MetaConfig& cfg, const MamlConfig& maml_cfg,
                            const agent::AgentConfig& agent_cfg, const sim::RewardConfig& reward_cfg,
                            std::uint64_t seed);

// One-step model (state, action) -> (next state, reward) with input and
// output standardization.
struct DynamicsModel {
  nn::Mlp net;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd output_mean;
  Eigen::VectorXd output_scale;

  int state_dim() const { return static_cast<int>(output_mean.size()) - 1; }

  Eigen::MatrixXd NormalizeInput(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd DenormalizeInput(const Eigen::MatrixXd& z) const;
  Eigen::MatrixXd NormalizeOutput(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd DenormalizeOutput(const Eigen::MatrixXd& z) const;

  // Columns are samples; returns (state_dim + 1) x n, reward in the last row.
  Eigen::MatrixXd Predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;

  // Mean squared error in normalized output units.
  double NormalizedMse(std::span<const sim::Transition> data) const;
};

struct DynamicsFitConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::vector<int> hidden_sizes{64, 128, 64};
};

DynamicsModel FitDynamicsModel(std::span<const sim::Transition> data, const DynamicsFitConfig& cfg, Rng& rng);

// Continues training an existing model; the normalization is kept.
void RefitDynamicsModel(DynamicsModel& model, std::span<const sim::Transition> data, const DynamicsFitConfig& cfg,
                        Rng& rng);

// Gradient of the normalized one-step MSE for the given samples.
nn::LayerTensors DynamicsLossGradient(const DynamicsModel& model, std::span<const sim::Transition> data,
                                      double* loss = nullptr);

struct PlanResult {
  sim::Action action;
  std::size_t best = 0;
  std::vector<double> predicted_returns;
};

// Rolls each candidate action sequence through the model and returns the
// first action of the best one by summed predicted reward.
PlanResult PlanOverCandidates(const DynamicsModel& model, const Eigen::VectorXd& state,
                              const std::vector<std::vector<sim::Action>>& candidates);

// Random shooting over `candidates` uniform action sequences.
PlanResult RlMpcPlan(const DynamicsModel& model, const Eigen::VectorXd& state, int horizon, int candidates,
                     Rng& rng);

struct RlMpcConfig {
  int horizon = 12;
  int candidates = 256;
  int warmup_hours = 48;
  int refit_every_hours = 24;
  DynamicsFitConfig fit;
  int refit_epochs = 5;
};

// Online RL-MPC: random exploration for the warm-up hours, then planning
// with a model refitted on all data seen so far every refit interval.
std::vector<meta::EpisodeRecord> RunRlMpc(const sim::BuildingSpec& building, const sim::RewardConfig& reward_cfg,
                                          int episodes, const RlMpcConfig& cfg, Rng& rng);

}  // namespace metaems::baselines
