#include <gtest/gtest.h>

#include <algorithm>
#include <span>
#include <sstream>
#include <vector>

#include "metaems/errors.hpp"
#include "metaems/meta.hpp"
#include "support/fixtures.hpp"

using namespace metaems;
using namespace metaems::meta;
using metaems::testing::RandomTransition;
using metaems::testing::SmallBuilding;
using metaems::testing::TinyAgentConfig;

namespace {

MetaState TinyMeta(std::uint64_t seed, const agent::AgentConfig& cfg, double beta = 1e-3) {
  Rng rng(seed);
  return MetaState::Random(sim::kObservationDim, cfg, beta, beta, rng);
}

std::vector<sim::BuildingSpec> Sources(int n, int length, int zone = 1) {
  std::vector<sim::BuildingSpec> out;
  for (int i = 0; i < n; ++i) out.push_back(SmallBuilding(zone, length, 100 + static_cast<std::uint64_t>(i)));
  return out;
}

agent::ReplayBuffer FilledBuffer(std::uint64_t seed, int n) {
  Rng rng(seed);
  agent::ReplayBuffer buf(256);
  for (int i = 0; i < n; ++i) buf.Push(RandomTransition(sim::kObservationDim, rng));
  return buf;
}

}  // namespace

TEST(MetaConfig, AutoRoundsCoverTwoEpisodesPerSource) {
  MetaConfig cfg;
  EXPECT_EQ(cfg.ResolvedRounds(8), 6);  // ceil(16 / 3)
  EXPECT_EQ(cfg.ResolvedRounds(10), 7);
  cfg.rounds = 4;
  EXPECT_EQ(cfg.ResolvedRounds(8), 4);
}

TEST(MetaConfig, IntervalMustFitEpisode) {
  MetaConfig cfg;
  cfg.t_theta = 0;
  EXPECT_THROW(cfg.Validate(720), ConfigError);
  cfg.t_theta = 721;
  EXPECT_THROW(cfg.Validate(720), ConfigError);
  cfg.t_theta = 720;
  EXPECT_NO_THROW(cfg.Validate(720));
}

TEST(BuildingBatch, LargerThanSourcesIsConfigError) {
  Rng rng(1);
  EXPECT_THROW(SampleBuildingBatch(2, 3, rng), ConfigError);
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(1, cfg);
  MetaConfig mc;
  mc.t_theta = 10;
  EXPECT_THROW(MetaTrain(meta, Sources(2, 20), mc, cfg, sim::RewardConfig{}, 5), ConfigError);
}

TEST(BuildingBatch, DistinctIndicesWithinRange) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    auto idx = SampleBuildingBatch(8, 3, rng);
    ASSERT_EQ(idx.size(), 3u);
    std::sort(idx.begin(), idx.end());
    EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    EXPECT_LT(idx.back(), 8u);
  }
}

TEST(BuildingAdapt, ZeroIntervalReturnsInitialization) {
  const auto cfg = TinyAgentConfig();
  const MetaState meta = TinyMeta(2, cfg);
  agent::ActorCritic ag = AgentFromMeta(TinyMeta(3, cfg), cfg);  // different params
  sim::BuildingEnv env(SmallBuilding(1, 30, 1), sim::RewardConfig{});
  agent::ReplayBuffer buf(100);
  Rng rng(4);
  BuildingAdapt(meta, ag, env, 0, buf, rng);
  EXPECT_TRUE(ag.actor() == meta.actor0);
  EXPECT_TRUE(ag.critic() == meta.critic0);
  EXPECT_EQ(env.hour_index(), 0);
}

TEST(BuildingAdapt, FrozenRatesKeepInitialization) {
  auto cfg = TinyAgentConfig();
  cfg.lr_actor = cfg.lr_critic = 0.0;
  const MetaState meta = TinyMeta(2, cfg);
  agent::ActorCritic ag = AgentFromMeta(meta, cfg);
  sim::BuildingEnv env(SmallBuilding(1, 40, 1), sim::RewardConfig{});
  agent::ReplayBuffer buf(100);
  Rng rng(4);
  BuildingAdapt(meta, ag, env, 30, buf, rng);
  EXPECT_TRUE(ag.actor() == meta.actor0);
  EXPECT_TRUE(ag.critic() == meta.critic0);
  EXPECT_EQ(env.hour_index(), 30);
}

TEST(BuildingAdapt, MatchesStandaloneAgentReplay) {
  const auto cfg = TinyAgentConfig();
  const MetaState meta = TinyMeta(2, cfg);
  const auto spec = SmallBuilding(3, 40, 6);

  agent::ActorCritic adapted = AgentFromMeta(TinyMeta(99, cfg), cfg);
  sim::BuildingEnv env(spec, sim::RewardConfig{});
  agent::ReplayBuffer buf(100);
  Rng rng(4);
  BuildingAdapt(meta, adapted, env, 25, buf, rng);

  // Replay: a fresh agent from the same initialization, stepped by hand.
  agent::ActorCritic replay(meta.actor0, meta.critic0, cfg);
  sim::BuildingEnv env2(spec, sim::RewardConfig{});
  agent::ReplayBuffer buf2(100);
  Rng rng2(4);
  for (int t = 0; t < 25; ++t) {
    const auto a = replay.Act(env2.Observe(), true, rng2);
    buf2.Push(env2.Step(a));
    replay.UpdateStep(buf2, rng2);
  }
  EXPECT_TRUE(adapted == replay);
  EXPECT_GT(adapted.update_count(), 0);
}

TEST(MetaGradient, TwoIdenticalBuildingsDoubleTheGradient) {
  const auto cfg = TinyAgentConfig();
  const MetaState meta = TinyMeta(5, cfg);
  const agent::ActorCritic ag = AgentFromMeta(meta, cfg);
  const auto buf = FilledBuffer(7, 30);

  const std::vector<agent::ActorCritic> one{ag};
  const std::vector<const agent::ReplayBuffer*> one_buf{&buf};
  std::vector<Rng> one_rng{Rng(11)};
  const auto g1 = ComputeMetaGradient(one, one_buf, one_rng, 8, 1);

  const std::vector<agent::ActorCritic> two{ag, ag};
  const std::vector<const agent::ReplayBuffer*> two_buf{&buf, &buf};
  std::vector<Rng> two_rng{Rng(11), Rng(11)};
  const auto g2 = ComputeMetaGradient(two, two_buf, two_rng, 8, 1);

  for (std::size_t l = 0; l < g1.critic.weights.size(); ++l) {
    EXPECT_TRUE((2.0 * g1.critic.weights[l]).isApprox(g2.critic.weights[l], 1e-15));
    EXPECT_TRUE((2.0 * g1.critic.biases[l]).isApprox(g2.critic.biases[l], 1e-15));
  }
  for (std::size_t l = 0; l < g1.actor.weights.size(); ++l) {
    EXPECT_TRUE((2.0 * g1.actor.weights[l]).isApprox(g2.actor.weights[l], 1e-15));
  }
}

TEST(MetaGradient, EmptyBufferThrows) {
  const auto cfg = TinyAgentConfig();
  const MetaState meta = TinyMeta(5, cfg);
  const std::vector<agent::ActorCritic> agents{AgentFromMeta(meta, cfg)};
  agent::ReplayBuffer empty(10);
  const std::vector<const agent::ReplayBuffer*> bufs{&empty};
  std::vector<Rng> rngs{Rng(1)};
  EXPECT_THROW(ComputeMetaGradient(agents, bufs, rngs, 8, 1), EmptyBatch);
}

TEST(GroupAdapt, ZeroMetaRateLeavesInitialization) {
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(5, cfg, 0.0);
  const MetaState before = meta;
  const auto buf = FilledBuffer(7, 30);
  const std::vector<agent::ActorCritic> agents{AgentFromMeta(meta, cfg)};
  const std::vector<const agent::ReplayBuffer*> bufs{&buf};
  std::vector<Rng> rngs{Rng(1)};
  GroupAdapt(meta, agents, bufs, rngs, 8, 1);
  EXPECT_TRUE(meta.actor0 == before.actor0);
  EXPECT_TRUE(meta.critic0 == before.critic0);
}

TEST(GroupAdapt, NoInnerStepsIsOnePlainUpdate) {
  // One building, nothing adapted, beta = alpha: the meta step is the plain
  // critic step of the agent and an actor step against the same critic.
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(5, cfg, cfg.lr_critic);
  const auto buf = FilledBuffer(7, 30);
  agent::ActorCritic plain = AgentFromMeta(meta, cfg);
  const std::vector<agent::ActorCritic> agents{plain};

  Rng sample(13);
  const agent::Batch batch = agent::MakeBatch(buf.Sample(8, sample));
  const auto actor_grad = plain.ActorLoss(batch).grads;
  plain.UpdateOnBatch(batch);
  nn::Mlp actor = meta.actor0;
  nn::Adam opt(actor, nn::AdamConfig{.learning_rate = cfg.lr_actor});
  opt.Step(actor, actor_grad);

  const std::vector<const agent::ReplayBuffer*> bufs{&buf};
  std::vector<Rng> rngs{Rng(13)};
  GroupAdapt(meta, agents, bufs, rngs, 8, 1);
  EXPECT_TRUE(meta.critic0 == plain.critic());
  EXPECT_TRUE(meta.actor0 == actor);
}

TEST(MetaTrain, ThirtySixGroupUpdatesPerRoundAtMonthScale) {
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(1, cfg);
  MetaConfig mc;
  mc.t_theta = 20;
  mc.rounds = 1;
  int rows = 0;
  const auto stats =
      MetaTrain(meta, Sources(3, 720), mc, cfg, sim::RewardConfig{}, 7, [&](const TrainLogRow&) { ++rows; });
  ASSERT_EQ(stats.group_updates_per_round.size(), 1u);
  EXPECT_EQ(stats.group_updates_per_round[0], 36);
  EXPECT_EQ(rows, 36);
  EXPECT_EQ(stats.total_steps, 3 * 720);
  EXPECT_EQ(meta.rounds_completed, 1);
}

TEST(MetaTrain, PartialLastIntervalCountsOnce) {
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(1, cfg);
  MetaConfig mc;
  mc.t_theta = 20;
  mc.rounds = 1;
  mc.building_batch_size = 1;
  const auto stats = MetaTrain(meta, Sources(1, 50), mc, cfg, sim::RewardConfig{}, 7);
  EXPECT_EQ(stats.group_updates_per_round[0], 3);  // ceil(50 / 20)
}

TEST(MetaTrain, FirstIntervalReplaysFromStartingInitialization) {
  // Logged losses of interval 0 are reproduced by agents built from the
  // starting meta state.
  const auto cfg = TinyAgentConfig();
  MetaState meta = TinyMeta(1, cfg);
  const MetaState start = meta;
  MetaConfig mc;
  mc.t_theta = 15;
  mc.rounds = 1;
  mc.building_batch_size = 2;
  const auto sources = Sources(3, 30);
  std::vector<TrainLogRow> log;
  MetaTrain(meta, sources, mc, cfg, sim::RewardConfig{}, 21, [&](const TrainLogRow& r) { log.push_back(r); });
  ASSERT_EQ(log.size(), 2u);

  const std::uint64_t rs = RoundSeed(21, 0);
  for (std::size_t k = 0; k < 2; ++k) {
    agent::ActorCritic ag = AgentFromMeta(start, cfg);
    sim::BuildingEnv env(sources[static_cast<std::size_t>(log[0].buildings[k])], sim::RewardConfig{});
    agent::ReplayBuffer buf(static_cast<std::size_t>(cfg.buffer_capacity));
    Rng brng = BuildingRng(rs, static_cast<int>(k));
    BuildingAdapt(start, ag, env, 15, buf, brng);
    Rng srng = MetaSampleRng(rs, static_cast<int>(k));
    const agent::Batch b = agent::MakeBatch(buf.Sample(8, srng));
    EXPECT_EQ(ag.CriticLoss(b).loss, log[0].critic_losses[k]);
    EXPECT_EQ(ag.ActorLoss(b).loss, log[0].actor_losses[k]);
  }
}

TEST(MetaTrain, FixedSeedIsBitReproducible) {
  const auto cfg = TinyAgentConfig();
  MetaConfig mc;
  mc.t_theta = 10;
  mc.rounds = 2;
  const auto sources = Sources(4, 40);
  MetaState a = TinyMeta(1, cfg), b = TinyMeta(1, cfg);
  MetaTrain(a, sources, mc, cfg, sim::RewardConfig{}, 3);
  MetaTrain(b, sources, mc, cfg, sim::RewardConfig{}, 3);
  EXPECT_TRUE(a == b);
}

TEST(MetaTrain, ResumeFromCheckpointContinuesTrajectory) {
  const auto cfg = TinyAgentConfig();
  MetaConfig mc;
  mc.t_theta = 10;
  mc.rounds = 3;
  const auto sources = Sources(4, 40);
  MetaState straight = TinyMeta(1, cfg);
  MetaTrain(straight, sources, mc, cfg, sim::RewardConfig{}, 3);

  MetaState partial = TinyMeta(1, cfg);
  MetaConfig first = mc;
  first.rounds = 1;
  MetaTrain(partial, sources, first, cfg, sim::RewardConfig{}, 3);
  std::stringstream ss;
  partial.Save(ss);
  MetaState resumed = MetaState::Load(ss);
  EXPECT_TRUE(resumed == partial);
  MetaTrain(resumed, sources, mc, cfg, sim::RewardConfig{}, 3);
  EXPECT_TRUE(resumed == straight);
}

TEST(MetaTrain, DegenerateScheduleIsPlainTrainingPlusOneMetaStep) {
  auto cfg = TinyAgentConfig();
  cfg.lr_actor = cfg.lr_critic = 2e-3;
  const MetaState start = TinyMeta(8, cfg, 2e-3);
  const auto source = SmallBuilding(2, 50, 77);
  MetaConfig mc;
  mc.t_theta = 50;
  mc.rounds = 1;
  mc.building_batch_size = 1;
  MetaState meta = start;
  MetaTrain(meta, std::span(&source, 1), mc, cfg, sim::RewardConfig{}, 1234);

  // Plain training: one online episode from the initialization.
  const std::uint64_t rs = RoundSeed(1234, 0);
  Rng train_rng = BuildingRng(rs, 0);
  const auto trained = AdaptOnline(AgentFromMeta(start, cfg), source, sim::RewardConfig{}, 1, train_rng);
  const agent::ActorCritic& ag = trained.final_agent;
  EXPECT_EQ(ag.update_count(), 50 - cfg.batch_size + 1);

  // Terminal meta step on one fresh batch from the episode's buffer.
  agent::ReplayBuffer buf(static_cast<std::size_t>(cfg.buffer_capacity));
  {
    sim::BuildingEnv env(source, sim::RewardConfig{});
    agent::ActorCritic replay = AgentFromMeta(start, cfg);
    Rng rng = BuildingRng(rs, 0);
    agent::Rollout(replay, env, 50, true, buf, rng);
  }
  Rng sample = MetaSampleRng(rs, 0);
  const agent::Batch batch = agent::MakeBatch(buf.Sample(static_cast<std::size_t>(cfg.batch_size), sample));
  nn::Mlp critic0 = start.critic0, actor0 = start.actor0;
  nn::Adam copt(critic0, nn::AdamConfig{.learning_rate = 2e-3});
  nn::Adam aopt(actor0, nn::AdamConfig{.learning_rate = 2e-3});
  copt.Step(critic0, ag.CriticLoss(batch).grads);
  aopt.Step(actor0, ag.ActorLoss(batch).grads);

  EXPECT_TRUE(meta.critic0 == critic0);
  EXPECT_TRUE(meta.actor0 == actor0);
}

TEST(MetaTest, FrozenRatesEvaluateInitialization) {
  auto cfg = TinyAgentConfig();
  cfg.lr_actor = cfg.lr_critic = 0.0;
  const MetaState meta = TinyMeta(4, cfg);
  const MetaState before = meta;
  const std::vector<sim::BuildingSpec> targets{SmallBuilding(1, 48, 5), SmallBuilding(1, 48, 6)};
  const auto results = MetaTest(meta, targets, 2, cfg, sim::RewardConfig{}, 9, /*explore=*/false);
  EXPECT_TRUE(meta == before);
  ASSERT_EQ(results.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    agent::ActorCritic ag = AgentFromMeta(meta, cfg);
    sim::BuildingEnv env(targets[g], sim::RewardConfig{});
    Rng rng(0);
    double total = 0.0;
    while (!env.Done()) total += env.Step(ag.Act(env.Observe(), false, rng)).reward;
    EXPECT_EQ(results[g].episodes[0].total_reward, total);
    EXPECT_EQ(results[g].episodes[1].total_reward, total);
    EXPECT_TRUE(results[g].final_agent.actor() == meta.actor0);
  }
}

TEST(MetaTest, AdaptationMovesParameters) {
  const auto cfg = TinyAgentConfig();
  const MetaState meta = TinyMeta(4, cfg);
  const std::vector<sim::BuildingSpec> targets{SmallBuilding(1, 48, 5)};
  const auto results = MetaTest(meta, targets, 1, cfg, sim::RewardConfig{}, 9);
  EXPECT_FALSE(results[0].final_agent.actor() == meta.actor0);
  EXPECT_FALSE(results[0].final_agent.critic() == meta.critic0);
  EXPECT_EQ(results[0].episodes[0].net_consumption.size(), 48u);
}
