#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "metaems/baselines.hpp"
#include "metaems/errors.hpp"
#include "support/fixtures.hpp"

using namespace metaems;
using namespace metaems::baselines;
using metaems::testing::MaxRelativeGradientError;
using metaems::testing::SmallBuilding;
using metaems::testing::TinyAgentConfig;

namespace {

// x' = A x + B a, r = w.x + u.a: a linear system the model can represent.
std::vector<sim::Transition> LinearSystemData(int n, Rng& rng) {
  Eigen::MatrixXd A(3, 3);
  A << 0.9, 0.1, 0.0, -0.2, 0.8, 0.1, 0.0, 0.3, 0.5;
  Eigen::MatrixXd B(3, 2);
  B << 1.0, 0.0, 0.0, 0.5, -0.5, 0.2;
  const Eigen::Vector3d w(1.0, -2.0, 0.5);
  const Eigen::Vector2d u(-1.0, 0.3);
  std::vector<sim::Transition> out;
  for (int i = 0; i < n; ++i) {
    sim::Transition tr;
    tr.state = Eigen::Vector3d(UniformIn(rng, -1, 1), UniformIn(rng, -1, 1), UniformIn(rng, -1, 1));
    tr.action = {UniformIn(rng, -1, 1), UniformIn(rng, 0, 1)};
    const Eigen::Vector2d a(tr.action.esu_command, tr.action.hvac_command);
    tr.next_state = A * tr.state + B * a;
    tr.reward = w.dot(tr.state) + u.dot(a);
    out.push_back(tr);
  }
  return out;
}

DynamicsFitConfig SmallFit(int epochs) {
  DynamicsFitConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden_sizes = {16, 16};
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  return cfg;
}

}  // namespace

TEST(Thermostat, InsideBandIsOff) {
  sim::BuildingConfig cfg;
  EXPECT_DOUBLE_EQ(ThermostatCommand(cfg.indoor_heat_setpoint_c, cfg), 0.0);
  EXPECT_DOUBLE_EQ(ThermostatCommand(22.0, cfg), 0.0);
}

TEST(Thermostat, SaturatesFarOutsideBand) {
  sim::BuildingConfig cfg;
  EXPECT_DOUBLE_EQ(ThermostatCommand(cfg.indoor_cool_setpoint_c + 30.0, cfg), 1.0);
  EXPECT_DOUBLE_EQ(ThermostatCommand(cfg.indoor_heat_setpoint_c - 30.0, cfg), 1.0);
}

TEST(Thermostat, SmallGapClosedInOneStep) {
  sim::BuildingConfig cfg;
  const double temp = cfg.indoor_cool_setpoint_c + 0.5;
  const double cmd = ThermostatCommand(temp, cfg);
  ASSERT_GT(cmd, 0.0);
  ASSERT_LT(cmd, 1.0);
  // Without drift (T_out = T) the command lands exactly on the setpoint.
  const auto r = sim::ThermalUpdate(temp, sim::TraceRow{0, 0, 0, temp, 0.2}, cmd, cfg);
  EXPECT_NEAR(r.new_indoor_temp_c, cfg.indoor_cool_setpoint_c, 1e-12);
}

TEST(NoControl, NeverUsesBattery) {
  const auto spec = SmallBuilding(1, 48, 3);
  sim::BuildingEnv env(spec, sim::RewardConfig{});
  while (!env.Done()) {
    const auto a = NoControlPolicy(env);
    EXPECT_EQ(a.esu_command, 0.0);
    env.Step(a);
  }
}

TEST(Rbc, DefaultTableEntries) {
  const auto t = RbcRuleTable::Default();
  EXPECT_DOUBLE_EQ(RbcPolicy(23, t).esu_command, 0.5);
  EXPECT_DOUBLE_EQ(RbcPolicy(3, t).esu_command, 0.5);
  EXPECT_LT(RbcPolicy(12, t).esu_command, 0.0);
  EXPECT_DOUBLE_EQ(RbcPolicy(8, t).esu_command, 0.0);
  double total = 0.0;
  for (int h = 0; h < 24; ++h) total += RbcPolicy(h, t).esu_command;
  EXPECT_NEAR(total, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(RbcPolicy(12, t).esu_command, -0.5 * 10.0 / 13.0);
}

TEST(Rbc, PureFunctionOfHour) {
  const auto t = RbcRuleTable::Default();
  for (int h = 0; h < 24; ++h) EXPECT_EQ(RbcPolicy(h, t), RbcPolicy(h, t));
  EXPECT_THROW(RbcPolicy(24, t), InvalidRange);
  // Same hour and indoor temperature in two different buildings: same action.
  auto a = SmallBuilding(1, 30, 1), b = SmallBuilding(3, 30, 2);
  a.config.initial_indoor_temp_c = b.config.initial_indoor_temp_c = 22.0;
  sim::BuildingEnv ea(a, sim::RewardConfig{}), eb(b, sim::RewardConfig{});
  EXPECT_EQ(RbcControl(ea, t), RbcControl(eb, t));
}

TEST(Rbc, CsvRoundTripAndShippedTable) {
  const auto path = std::filesystem::temp_directory_path() / "metaems_rbc.csv";
  RbcRuleTable::Default().WriteCsv(path);
  const auto back = RbcRuleTable::LoadCsv(path);
  EXPECT_EQ(back.entries, RbcRuleTable::Default().entries);
  std::filesystem::remove(path);
  if (const char* root = std::getenv("METAEMS_SOURCE_DIR")) {
    const auto shipped = RbcRuleTable::LoadCsv(std::filesystem::path(root) / "configs" / "rbc_default.csv");
    EXPECT_EQ(shipped.entries, RbcRuleTable::Default().entries);
  }
}

TEST(Rbc, MalformedCsvThrows) {
  const auto path = std::filesystem::temp_directory_path() / "metaems_rbc_bad.csv";
  {
    std::ofstream out(path);
    out << "hour,esu_command,hvac_command\n0,0.5,0\n";
  }
  EXPECT_THROW(RbcRuleTable::LoadCsv(path), IoError);
  {
    std::ofstream out(path);
    out << "hour,esu,hvac\n";
  }
  EXPECT_THROW(RbcRuleTable::LoadCsv(path), IoError);
  std::filesystem::remove(path);
}

TEST(RunPolicy, RecordsOneEntryPerHour) {
  const auto spec = SmallBuilding(2, 72, 4);
  const auto rec = RunPolicy(spec, sim::RewardConfig{}, NoControlPolicy);
  EXPECT_EQ(rec.net_consumption.size(), 72u);
  EXPECT_EQ(rec.prices.size(), 72u);
  EXPECT_EQ(rec.prices[13], spec.trace[13].price_per_kwh);
}

TEST(Pretrained, EmptyPoolThrows) {
  Rng rng(1);
  EXPECT_THROW(PretrainedInit({}, rng), EmptyPool);
}

TEST(Pretrained, SingletonAndCopySemantics) {
  Rng init(1), rng(2);
  std::vector<agent::ActorCritic> pool{agent::ActorCritic(sim::kObservationDim, TinyAgentConfig(), init)};
  agent::ActorCritic pick = PretrainedInit(pool, rng);
  EXPECT_TRUE(pick == pool[0]);
  auto p = pick.actor().Flatten();
  p[0] += 1.0;
  pick.mutable_actor().Unflatten(p);
  EXPECT_FALSE(pick == pool[0]);
}

TEST(Pretrained, SelectionIsSeedReproducibleAndUniform) {
  Rng init(1);
  std::vector<agent::ActorCritic> pool;
  for (int i = 0; i < 4; ++i) pool.emplace_back(4, TinyAgentConfig(), init);
  Rng a(9), b(9);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 400; ++i) {
    const auto pa = PretrainedInit(pool, a);
    const auto pb = PretrainedInit(pool, b);
    EXPECT_TRUE(pa == pb);
    for (int k = 0; k < 4; ++k) {
      if (pa == pool[static_cast<std::size_t>(k)]) ++counts[static_cast<std::size_t>(k)];
    }
  }
  for (int c : counts) EXPECT_GT(c, 60);
}

TEST(Maml, OneMetaUpdatePerRound) {
  const auto cfg = TinyAgentConfig();
  Rng rng(1);
  auto meta = meta::MetaState::Random(sim::kObservationDim, cfg, 1e-3, 1e-3, rng);
  std::vector<sim::BuildingSpec> sources;
  for (int i = 0; i < 3; ++i) sources.push_back(SmallBuilding(1, 720, 10 + static_cast<std::uint64_t>(i)));
  meta::MetaConfig mc;
  mc.t_theta = 20;
  mc.rounds = 2;
  const auto stats = MamlEpisodicTrain(meta, sources, mc, MamlConfig{1}, cfg, sim::RewardConfig{}, 5);
  EXPECT_EQ(stats.meta_updates_per_round, (std::vector<int>{1, 1}));
  EXPECT_EQ(meta.critic_opt.step_count(), 2);
  EXPECT_EQ(meta.actor_opt.step_count(), 2);
}

TEST(Maml, NoEpochsNoMetaRateIsFrozen) {
  const auto cfg = TinyAgentConfig();
  Rng rng(1);
  auto meta = meta::MetaState::Random(sim::kObservationDim, cfg, 0.0, 0.0, rng);
  const auto before = meta;
  std::vector<sim::BuildingSpec> sources{SmallBuilding(1, 40, 1), SmallBuilding(1, 40, 2)};
  meta::MetaConfig mc;
  mc.t_theta = 10;
  mc.rounds = 1;
  mc.building_batch_size = 2;
  MamlEpisodicTrain(meta, sources, mc, MamlConfig{0}, cfg, sim::RewardConfig{}, 5);
  EXPECT_TRUE(meta.actor0 == before.actor0);
  EXPECT_TRUE(meta.critic0 == before.critic0);
}

TEST(Dynamics, EmptyDataThrows) {
  Rng rng(1);
  EXPECT_THROW(FitDynamicsModel({}, SmallFit(1), rng), EmptyData);
}

TEST(Dynamics, NormalizationRoundTrip) {
  Rng rng(3);
  const auto data = LinearSystemData(50, rng);
  const auto model = FitDynamicsModel(data, SmallFit(1), rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 7) * 10.0;
  EXPECT_LT((model.DenormalizeInput(model.NormalizeInput(x)) - x).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(4, 7) * 10.0;
  EXPECT_LT((model.DenormalizeOutput(model.NormalizeOutput(y)) - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dynamics, FitsLinearSystem) {
  Rng rng(4);
  const auto data = LinearSystemData(1000, rng);
  const auto model = FitDynamicsModel(data, SmallFit(200), rng);
  EXPECT_LT(model.NormalizedMse(data), 1e-2);
  // Predicting the mean scores 1 in normalized units.
  EXPECT_LT(model.NormalizedMse(data), 1.0);
  Rng fresh(5);
  EXPECT_LT(model.NormalizedMse(LinearSystemData(200, fresh)), 1e-2);
}

TEST(Dynamics, LossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 40);
    const auto data = LinearSystemData(12, rng);
    auto model = FitDynamicsModel(data, SmallFit(2), rng);
    const auto analytic = DynamicsLossGradient(model, data);
    int kinks = 0;
    const double err = MaxRelativeGradientError(model.net, analytic, [&] {
      double loss = 0.0;
      DynamicsLossGradient(model, data, &loss);
      return loss;
    }, 1e-5, &kinks);
    EXPECT_LT(err, 1e-4) << "seed " << seed;
    EXPECT_LE(static_cast<std::size_t>(kinks), model.net.ParameterCount() / 20) << "seed " << seed;
  }
}

TEST(Planner, HorizonOneMatchesExhaustiveGrid) {
  Rng rng(6);
  const auto data = LinearSystemData(200, rng);
  const auto model = FitDynamicsModel(data, SmallFit(30), rng);
  const Eigen::Vector3d state(0.2, -0.4, 0.1);

  std::vector<std::vector<sim::Action>> grid;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) grid.push_back({sim::Action{-1.0 + 0.2 * i, 0.1 * j}});
  }
  const auto plan = PlanOverCandidates(model, state, grid);

  // Oracle: predict every grid point on its own and take the argmax.
  double best = -1e300;
  sim::Action best_action;
  for (const auto& seq : grid) {
    Eigen::MatrixXd a(2, 1);
    a << seq[0].esu_command, seq[0].hvac_command;
    const double r = model.Predict(state, a)(3, 0);
    if (r > best) {
      best = r;
      best_action = seq[0];
    }
  }
  EXPECT_EQ(plan.action, best_action);
  EXPECT_NEAR(plan.predicted_returns[plan.best], best, 1e-12);
}

TEST(Planner, SingleCandidateReturnsItsFirstAction) {
  Rng rng(7);
  const auto data = LinearSystemData(50, rng);
  const auto model = FitDynamicsModel(data, SmallFit(2), rng);
  const std::vector<std::vector<sim::Action>> one{{sim::Action{0.3, 0.4}, sim::Action{-1, 1}}};
  EXPECT_EQ(PlanOverCandidates(model, Eigen::Vector3d::Zero(), one).action, (sim::Action{0.3, 0.4}));
}

TEST(Planner, BestDominatesAndIsSeedReproducible) {
  Rng rng(8);
  const auto data = LinearSystemData(100, rng);
  const auto model = FitDynamicsModel(data, SmallFit(5), rng);
  Rng a(1), b(1);
  const auto pa = RlMpcPlan(model, Eigen::Vector3d(0.1, 0.1, 0.1), 4, 64, a);
  const auto pb = RlMpcPlan(model, Eigen::Vector3d(0.1, 0.1, 0.1), 4, 64, b);
  EXPECT_EQ(pa.action, pb.action);
  for (double r : pa.predicted_returns) EXPECT_LE(r, pa.predicted_returns[pa.best]);
  EXPECT_THROW(RlMpcPlan(model, Eigen::Vector3d::Zero(), 0, 4, a), InvalidRange);
}

TEST(RlMpc, RunsEpisodesOnBuilding) {
  const auto spec = SmallBuilding(1, 72, 5);
  RlMpcConfig cfg;
  cfg.horizon = 2;
  cfg.candidates = 8;
  cfg.warmup_hours = 24;
  cfg.refit_every_hours = 24;
  cfg.fit = SmallFit(3);
  cfg.refit_epochs = 1;
  Rng a(3), b(3);
  const auto ra = RunRlMpc(spec, sim::RewardConfig{}, 2, cfg, a);
  const auto rb = RunRlMpc(spec, sim::RewardConfig{}, 2, cfg, b);
  ASSERT_EQ(ra.size(), 2u);
  EXPECT_EQ(ra[1].net_consumption.size(), 72u);
  EXPECT_EQ(ra[1].total_reward, rb[1].total_reward);
}
