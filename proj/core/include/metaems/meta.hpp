#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "metaems/agent.hpp"
#include "metaems/neuralnet.hpp"
#include "metaems/simulator.hpp"

namespace metaems::meta {

// Group-shared initialization (theta_0 for the critic, phi_0 for the actor)
// and the meta-optimizer that moves it.
struct MetaState {
  nn::Mlp critic0;
  nn::Mlp actor0;
  nn::Adam critic_opt;
  nn::Adam actor_opt;
  long rounds_completed = 0;

  static MetaState Random(int obs_dim, const agent::AgentConfig& agent_cfg, double meta_lr_critic,
                          double meta_lr_actor, Rng& rng);

  void Save(std::ostream& out) const;
  static MetaState Load(std::istream& in);

  friend bool operator==(const MetaState& a, const MetaState& b);
};

struct MetaConfig {
  int t_theta = 20;
  // 0 picks enough rounds to simulate about two episodes per source building.
  int rounds = 0;
  int building_batch_size = 3;
  double meta_lr_critic = 1e-3;
  double meta_lr_actor = 1e-3;
  // Fresh batches D'_i per building for each group-level update.
  int meta_batches = 1;
  bool reset_buffers_each_round = true;
  bool explore = true;

  void Validate(int episode_length) const;
  int ResolvedRounds(std::size_t num_sources) const;
};

agent::ActorCritic AgentFromMeta(const MetaState& meta, const agent::AgentConfig& cfg);

// Re-initializes `agent` from the meta state and runs `interval` online
// steps with one update per step.
agent::RolloutStats BuildingAdapt(const MetaState& meta, agent::ActorCritic& agent, sim::BuildingEnv& env,
                                  int interval, agent::ReplayBuffer& buffer, Rng& rng, bool explore = true);

// First-order meta-gradient: critic/actor loss gradients evaluated at each
// building's adapted parameters on freshly sampled batches, summed in
// building order.
struct MetaGradient {
  nn::LayerTensors critic;
  nn::LayerTensors actor;
  std::vector<double> critic_losses;  // per building, mean over batches
  std::vector<double> actor_losses;
};

MetaGradient ComputeMetaGradient(std::span<const agent::ActorCritic> adapted,
                                 std::span<const agent::ReplayBuffer* const> buffers, std::span<Rng> rngs,
                                 int batch_size, int meta_batches);

struct GroupAdaptReport {
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
  std::vector<double> critic_losses;
  std::vector<double> actor_losses;
};

GroupAdaptReport GroupAdapt(MetaState& meta, std::span<const agent::ActorCritic> adapted,
                            std::span<const agent::ReplayBuffer* const> buffers, std::span<Rng> rngs,
                            int batch_size, int meta_batches);

struct TrainLogRow {
  int round = 0;
  int interval = 0;
  std::vector<int> buildings;
  std::vector<double> critic_losses;
  std::vector<double> actor_losses;
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
};

struct MetaTrainStats {
  std::vector<int> group_updates_per_round;
  long total_steps = 0;
};

using TrainLogSink = std::function<void(const TrainLogRow&)>;

// Seeds used by MetaTrain, exposed so callers can replay a round.
std::uint64_t RoundSeed(std::uint64_t seed, int round);
Rng BatchSelectionRng(std::uint64_t round_seed);
Rng BuildingRng(std::uint64_t round_seed, int slot);
Rng MetaSampleRng(std::uint64_t round_seed, int slot);

std::vector<std::size_t> SampleBuildingBatch(std::size_t num_sources, int batch_size, Rng& rng);

// Runs rounds [meta.rounds_completed, cfg.ResolvedRounds()) so that a state
// loaded from a checkpoint continues on the same trajectory.
MetaTrainStats MetaTrain(MetaState& meta, std::span<const sim::BuildingSpec> sources, const MetaConfig& cfg,
                         const agent::AgentConfig& agent_cfg, const sim::RewardConfig& reward_cfg,
                         std::uint64_t seed, const TrainLogSink& log = {});

struct EpisodeRecord {
  double total_reward = 0.0;
  std::vector<double> net_consumption;
  std::vector<double> prices;
};

struct AdaptationResult {
  std::vector<EpisodeRecord> episodes;
  agent::ActorCritic final_agent;
};

// Online adaptation on one building for `episodes` passes over its trace,
// with one gradient step per interaction. The replay buffer persists
// across episodes.
AdaptationResult AdaptOnline(agent::ActorCritic agent, const sim::BuildingSpec& building,
                             const sim::RewardConfig& reward_cfg, int episodes, Rng& rng, bool explore = true);

std::vector<AdaptationResult> MetaTest(const MetaState& meta, std::span<const sim::BuildingSpec> targets,
                                       int episodes, const agent::AgentConfig& agent_cfg,
                                       const sim::RewardConfig& reward_cfg, std::uint64_t seed,
                                       bool explore = true);

}  // namespace metaems::meta
