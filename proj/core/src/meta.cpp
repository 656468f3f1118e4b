#include "metaems/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "metaems/binary_io.hpp"
#include "metaems/errors.hpp"

namespace metaems::meta {

MetaState MetaState::Random(int obs_dim, const agent::AgentConfig& agent_cfg, double meta_lr_critic,
                            double meta_lr_actor, Rng& rng) {
  agent_cfg.Validate();
  MetaState m;
  m.actor0 = nn::Mlp::Uniform(agent::ActorLayers(obs_dim, agent_cfg.hidden_sizes), nn::Activation::kTanh, rng);
  m.critic0 =
      nn::Mlp::Uniform(agent::CriticLayers(obs_dim, agent_cfg.hidden_sizes), nn::Activation::kIdentity, rng);
  m.critic_opt = nn::Adam(m.critic0, nn::AdamConfig{.learning_rate = meta_lr_critic});
  m.actor_opt = nn::Adam(m.actor0, nn::AdamConfig{.learning_rate = meta_lr_actor});
  return m;
}

void MetaState::Save(std::ostream& out) const {
  io::WritePod<std::int64_t>(out, rounds_completed);
  nn::SaveMlp(out, critic0);
  nn::SaveMlp(out, actor0);
  critic_opt.Save(out);
  actor_opt.Save(out);
}

MetaState MetaState::Load(std::istream& in) {
  MetaState m;
  m.rounds_completed = io::ReadPod<std::int64_t>(in);
  if (m.rounds_completed < 0) throw IoError("negative round counter in meta state");
  m.critic0 = nn::LoadMlp(in);
  m.actor0 = nn::LoadMlp(in);
  m.critic_opt = nn::Adam::Load(in);
  m.actor_opt = nn::Adam::Load(in);
  if (m.critic0.input_dim() != m.actor0.input_dim() + sim::kActionDim || m.actor0.output_dim() != sim::kActionDim ||
      m.critic0.output_dim() != 1) {
    throw IoError("meta state networks are not a compatible actor/critic pair");
  }
  return m;
}

bool operator==(const MetaState& a, const MetaState& b) {
  return a.rounds_completed == b.rounds_completed && a.critic0 == b.critic0 && a.actor0 == b.actor0 &&
         a.critic_opt == b.critic_opt && a.actor_opt == b.actor_opt;
}

void MetaConfig::Validate(int episode_length) const {
  if (t_theta < 1 || t_theta > episode_length) {
    throw ConfigError("meta.t_theta must be in [1, episode_length]; got " + std::to_string(t_theta));
  }
  if (building_batch_size < 1) throw ConfigError("meta.building_batch_size must be >= 1");
  if (rounds < 0) throw ConfigError("meta.rounds must be >= 0");
  if (meta_batches < 1) throw ConfigError("meta.meta_batches must be >= 1");
  if (!(meta_lr_critic >= 0.0) || !(meta_lr_actor >= 0.0)) throw ConfigError("meta learning rates must be >= 0");
}

int MetaConfig::ResolvedRounds(std::size_t num_sources) const {
  if (rounds > 0) return rounds;
  const auto n = static_cast<int>(num_sources);
  return std::max(1, (2 * n + building_batch_size - 1) / building_batch_size);
}

agent::ActorCritic AgentFromMeta(const MetaState& meta, const agent::AgentConfig& cfg) {
  return agent::ActorCritic(meta.actor0, meta.critic0, cfg);
}

agent::RolloutStats BuildingAdapt(const MetaState& meta, agent::ActorCritic& agent, sim::BuildingEnv& env,
                                  int interval, agent::ReplayBuffer& buffer, Rng& rng, bool explore) {
  agent.ResetFrom(meta.actor0, meta.critic0);
  return agent::Rollout(agent, env, interval, explore, buffer, rng, /*learn=*/true);
}

MetaGradient ComputeMetaGradient(std::span<const agent::ActorCritic> adapted,
                                 std::span<const agent::ReplayBuffer* const> buffers, std::span<Rng> rngs,
                                 int batch_size, int meta_batches) {
  if (adapted.empty()) throw EmptyBatch("group adaptation needs at least one building");
  if (adapted.size() != buffers.size() || adapted.size() != rngs.size()) {
    throw ShapeMismatch("adapted agents, buffers and rngs must align");
  }
  MetaGradient g;
  g.critic = adapted.front().critic().ZerosLike();
  g.actor = adapted.front().actor().ZerosLike();
  for (std::size_t i = 0; i < adapted.size(); ++i) {
    const auto& learner = adapted[i];
    if (buffers[i] == nullptr || buffers[i]->empty()) throw EmptyBatch("building has no experience for D'");
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    for (int k = 0; k < meta_batches; ++k) {
      const agent::Batch batch =
          agent::MakeBatch(buffers[i]->Sample(static_cast<std::size_t>(batch_size), rngs[i]));
      auto c = learner.CriticLoss(batch);
      auto a = learner.ActorLoss(batch);
      g.critic += c.grads;
      g.actor += a.grads;
      critic_loss += c.loss;
      actor_loss += a.loss;
    }
    g.critic_losses.push_back(critic_loss / meta_batches);
    g.actor_losses.push_back(actor_loss / meta_batches);
  }
  return g;
}

GroupAdaptReport GroupAdapt(MetaState& meta, std::span<const agent::ActorCritic> adapted,
                            std::span<const agent::ReplayBuffer* const> buffers, std::span<Rng> rngs,
                            int batch_size, int meta_batches) {
  MetaGradient g = ComputeMetaGradient(adapted, buffers, rngs, batch_size, meta_batches);
  meta.critic_opt.Step(meta.critic0, g.critic);
  meta.actor_opt.Step(meta.actor0, g.actor);
  GroupAdaptReport report;
  report.critic_grad_norm = std::sqrt(g.critic.SquaredNorm());
  report.actor_grad_norm = std::sqrt(g.actor.SquaredNorm());
  report.critic_losses = std::move(g.critic_losses);
  report.actor_losses = std::move(g.actor_losses);
  return report;
}

std::uint64_t RoundSeed(std::uint64_t seed, int round) {
  return DeriveSeed(seed, "meta.round", {static_cast<std::uint64_t>(round)});
}

Rng BatchSelectionRng(std::uint64_t round_seed) { return MakeRng(round_seed, "meta.batch"); }

Rng BuildingRng(std::uint64_t round_seed, int slot) {
  return MakeRng(round_seed, "meta.building", {static_cast<std::uint64_t>(slot)});
}

Rng MetaSampleRng(std::uint64_t round_seed, int slot) {
  return MakeRng(round_seed, "meta.sample", {static_cast<std::uint64_t>(slot)});
}

std::vector<std::size_t> SampleBuildingBatch(std::size_t num_sources, int batch_size, Rng& rng) {
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > num_sources) {
    throw ConfigError("building batch of " + std::to_string(batch_size) + " exceeds " +
                      std::to_string(num_sources) + " available source buildings");
  }
  std::vector<std::size_t> idx(num_sources);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < static_cast<std::size_t>(batch_size); ++i) {
    const std::size_t j = i + UniformIndex(rng, num_sources - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(batch_size));
  return idx;
}

MetaTrainStats MetaTrain(MetaState& meta, std::span<const sim::BuildingSpec> sources, const MetaConfig& cfg,
                         const agent::AgentConfig& agent_cfg, const sim::RewardConfig& reward_cfg,
                         std::uint64_t seed, const TrainLogSink& log) {
  if (sources.empty()) throw ConfigError("meta-training needs source buildings");
  const int horizon = static_cast<int>(sources.front().trace.size());
  for (const auto& s : sources) {
    if (static_cast<int>(s.trace.size()) != horizon) throw ConfigError("source traces differ in length");
  }
  cfg.Validate(horizon);
  agent_cfg.Validate();
  const int rounds = cfg.ResolvedRounds(sources.size());
  const auto batch = static_cast<std::size_t>(cfg.building_batch_size);

  MetaTrainStats stats;
  std::vector<agent::ActorCritic> agents;
  std::vector<agent::ReplayBuffer> buffers;
  for (std::size_t k = 0; k < batch; ++k) {
    agents.push_back(AgentFromMeta(meta, agent_cfg));
    buffers.emplace_back(static_cast<std::size_t>(agent_cfg.buffer_capacity));
  }

  for (int round = static_cast<int>(meta.rounds_completed); round < rounds; ++round) {
    const std::uint64_t round_seed = RoundSeed(seed, round);
    Rng selection = BatchSelectionRng(round_seed);
    const auto chosen = SampleBuildingBatch(sources.size(), cfg.building_batch_size, selection);

    std::vector<sim::BuildingEnv> envs;
    std::vector<Rng> building_rngs;
    std::vector<Rng> sample_rngs;
    for (std::size_t k = 0; k < batch; ++k) {
      envs.emplace_back(sources[chosen[k]], reward_cfg);
      building_rngs.push_back(BuildingRng(round_seed, static_cast<int>(k)));
      sample_rngs.push_back(MetaSampleRng(round_seed, static_cast<int>(k)));
      if (cfg.reset_buffers_each_round) buffers[k].Clear();
    }
    std::vector<const agent::ReplayBuffer*> buffer_ptrs;
    for (const auto& b : buffers) buffer_ptrs.push_back(&b);

    int interval = 0;
    for (int t = 0; t < horizon; t += cfg.t_theta, ++interval) {
      for (std::size_t k = 0; k < batch; ++k) {
        const auto rs = BuildingAdapt(meta, agents[k], envs[k], cfg.t_theta, buffers[k], building_rngs[k], cfg.explore);
        stats.total_steps += rs.steps;
      }
      const auto report = GroupAdapt(meta, agents, buffer_ptrs, sample_rngs, agent_cfg.batch_size, cfg.meta_batches);
      if (log) {
        TrainLogRow row;
        row.round = round;
        row.interval = interval;
        for (auto c : chosen) row.buildings.push_back(static_cast<int>(c));
        row.critic_losses = report.critic_losses;
        row.actor_losses = report.actor_losses;
        row.critic_grad_norm = report.critic_grad_norm;
        row.actor_grad_norm = report.actor_grad_norm;
        log(row);
      }
    }
    stats.group_updates_per_round.push_back(interval);
    meta.rounds_completed = round + 1;
  }
  return stats;
}

AdaptationResult AdaptOnline(agent::ActorCritic learner, const sim::BuildingSpec& building,
                             const sim::RewardConfig& reward_cfg, int episodes, Rng& rng, bool explore) {
  sim::BuildingEnv env(building, reward_cfg);
  agent::ReplayBuffer buffer(static_cast<std::size_t>(learner.config().buffer_capacity));
  std::vector<double> prices;
  for (const auto& row : building.trace) prices.push_back(row.price_per_kwh);

  std::vector<EpisodeRecord> records;
  for (int ep = 0; ep < episodes; ++ep) {
    env.Reset();
    auto stats = agent::Rollout(learner, env, env.horizon(), explore, buffer, rng, /*learn=*/true);
    records.push_back({stats.total_reward, std::move(stats.net_consumption), prices});
  }
  return {std::move(records), std::move(learner)};
}

std::vector<AdaptationResult> MetaTest(const MetaState& meta, std::span<const sim::BuildingSpec> targets,
                                       int episodes, const agent::AgentConfig& agent_cfg,
                                       const sim::RewardConfig& reward_cfg, std::uint64_t seed, bool explore) {
  std::vector<AdaptationResult> results;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    Rng rng = MakeRng(seed, "meta.test", {g});
    results.push_back(AdaptOnline(AgentFromMeta(meta, agent_cfg), targets[g], reward_cfg, episodes, rng, explore));
  }
  return results;
}

}  // namespace metaems::meta
