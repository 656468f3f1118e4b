#include "metaems/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "metaems/errors.hpp"

namespace metaems::baselines {

double ThermostatCommand(double indoor_temp_c, const sim::BuildingConfig& cfg) {
  if (cfg.hvac_max_power_kw <= 0.0) return 0.0;
  double gap = 0.0;
  if (indoor_temp_c < cfg.indoor_heat_setpoint_c) {
    gap = cfg.indoor_heat_setpoint_c - indoor_temp_c;
  } else if (indoor_temp_c > cfg.indoor_cool_setpoint_c) {
    gap = indoor_temp_c - cfg.indoor_cool_setpoint_c;
  }
  const double power = gap * cfg.thermal_capacitance / (cfg.hvac_cop * sim::kStepHours);
  return std::clamp(power / cfg.hvac_max_power_kw, 0.0, 1.0);
}

sim::Action NoControlPolicy(const sim::BuildingEnv& env) {
  return {0.0, ThermostatCommand(env.state().indoor_temp_c, env.config())};
}

RbcRuleTable RbcRuleTable::Default() {
  constexpr double kCharge = 0.5;
  RbcRuleTable t;
  int charge_hours = 0;
  int discharge_hours = 0;
  for (int h = 0; h < 24; ++h) {
    if (h >= 22 || h <= 7) ++charge_hours;
    if (h >= 9 && h <= 21) ++discharge_hours;
  }
  const double discharge = -kCharge * charge_hours / discharge_hours;
  for (int h = 0; h < 24; ++h) {
    double esu = 0.0;
    if (h >= 22 || h <= 7) esu = kCharge;
    if (h >= 9 && h <= 21) esu = discharge;
    t.entries[static_cast<std::size_t>(h)] = {esu, 0.0};
  }
  return t;
}

RbcRuleTable RbcRuleTable::LoadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open RBC table " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "hour,esu_command,hvac_command") throw IoError("RBC table " + path.string() + " has a bad header");
  RbcRuleTable t;
  std::array<bool, 24> seen{};
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    int hour = -1;
    double esu = 0.0;
    double hvac = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &hour, &esu, &hvac) != 3) {
      throw IoError("RBC table " + path.string() + ": malformed row '" + line + "'");
    }
    if (hour < 0 || hour > 23 || seen[static_cast<std::size_t>(hour)]) {
      throw IoError("RBC table " + path.string() + ": bad or repeated hour " + std::to_string(hour));
    }
    if (esu < -1.0 || esu > 1.0 || hvac < 0.0 || hvac > 1.0) {
      throw IoError("RBC table " + path.string() + ": command out of range at hour " + std::to_string(hour));
    }
    seen[static_cast<std::size_t>(hour)] = true;
    t.entries[static_cast<std::size_t>(hour)] = {esu, hvac};
    ++rows;
  }
  if (rows != 24) throw IoError("RBC table " + path.string() + " must have exactly 24 rows");
  return t;
}

void RbcRuleTable::WriteCsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write RBC table " + path.string());
  out << "hour,esu_command,hvac_command\n";
  char buf[96];
  for (int h = 0; h < 24; ++h) {
    const auto& a = entries[static_cast<std::size_t>(h)];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", h, a.esu_command, a.hvac_command);
    out << buf;
  }
}

sim::Action RbcPolicy(int hour_of_day, const RbcRuleTable& table) {
  if (hour_of_day < 0 || hour_of_day > 23) throw InvalidRange("hour of day must be in 0..23");
  return table.entries[static_cast<std::size_t>(hour_of_day)];
}

sim::Action RbcControl(const sim::BuildingEnv& env, const RbcRuleTable& table, bool thermostat_hvac) {
  sim::Action a = RbcPolicy(env.hour_of_day(), table);
  if (thermostat_hvac) a.hvac_command = ThermostatCommand(env.state().indoor_temp_c, env.config());
  return a;
}

meta::EpisodeRecord RunPolicy(const sim::BuildingSpec& building, const sim::RewardConfig& reward_cfg,
                              const Policy& policy) {
  sim::BuildingEnv env(building, reward_cfg);
  meta::EpisodeRecord rec;
  while (!env.Done()) {
    rec.prices.push_back(env.current_row().price_per_kwh);
    const auto tr = env.Step(policy(env));
    rec.total_reward += tr.reward;
    rec.net_consumption.push_back(tr.net_consumption_e);
  }
  return rec;
}

agent::ActorCritic PretrainedInit(std::span<const agent::ActorCritic> pool, Rng& rng) {
  if (pool.empty()) throw EmptyPool("pretrained initialization needs at least one trained model");
  return pool[UniformIndex(rng, pool.size())];
}

MamlStats MamlEpisodicTrain(meta::MetaState& meta_state, std::span<const sim::BuildingSpec> sources,
                            const meta::MetaConfig& cfg, const MamlConfig& maml_cfg,
                            const agent::AgentConfig& agent_cfg, const sim::RewardConfig& reward_cfg,
                            std::uint64_t seed) {
  if (sources.empty()) throw ConfigError("MAML training needs source buildings");
  if (maml_cfg.epochs < 0) throw ConfigError("maml.epochs must be >= 0");
  const int horizon = static_cast<int>(sources.front().trace.size());
  cfg.Validate(horizon);
  const int rounds = cfg.ResolvedRounds(sources.size());
  const auto batch = static_cast<std::size_t>(cfg.building_batch_size);

  MamlStats stats;
  for (int round = static_cast<int>(meta_state.rounds_completed); round < rounds; ++round) {
    const std::uint64_t round_seed = meta::RoundSeed(seed, round);
    Rng selection = meta::BatchSelectionRng(round_seed);
    const auto chosen = meta::SampleBuildingBatch(sources.size(), cfg.building_batch_size, selection);

    std::vector<agent::ActorCritic> learners;
    std::vector<agent::ReplayBuffer> buffers;
    std::vector<Rng> sample_rngs;
    for (std::size_t k = 0; k < batch; ++k) {
      Rng rng = meta::BuildingRng(round_seed, static_cast<int>(k));
      learners.push_back(meta::AgentFromMeta(meta_state, agent_cfg));
      buffers.emplace_back(static_cast<std::size_t>(std::max(agent_cfg.buffer_capacity, horizon)));
      sample_rngs.push_back(meta::MetaSampleRng(round_seed, static_cast<int>(k)));

      sim::BuildingEnv env(sources[chosen[k]], reward_cfg);
      agent::Rollout(learners[k], env, horizon, cfg.explore, buffers[k], rng, /*learn=*/false);

      // Centralized end-of-episode training over the whole episode.
      const std::size_t n = buffers[k].size();
      std::vector<std::size_t> order(n);
      for (int epoch = 0; epoch < maml_cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(agent_cfg.batch_size)) {
          const std::size_t end = std::min(n, start + static_cast<std::size_t>(agent_cfg.batch_size));
          std::vector<const sim::Transition*> mb;
          for (std::size_t i = start; i < end; ++i) mb.push_back(&buffers[k].at(order[i]));
          learners[k].UpdateOnBatch(agent::MakeBatch(mb));
        }
      }
    }
    std::vector<const agent::ReplayBuffer*> buffer_ptrs;
    for (const auto& b : buffers) buffer_ptrs.push_back(&b);
    meta::GroupAdapt(meta_state, learners, buffer_ptrs, sample_rngs, agent_cfg.batch_size, cfg.meta_batches);
    stats.meta_updates_per_round.push_back(1);
    meta_state.rounds_completed = round + 1;
  }
  return stats;
}

namespace {

Eigen::MatrixXd ModelInputs(std::span<const sim::Transition> data) {
  const auto obs = data.front().state.size();
  Eigen::MatrixXd x(obs + sim::kActionDim, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    x.col(c).head(obs) = data[i].state;
    x(obs, c) = data[i].action.esu_command;
    x(obs + 1, c) = data[i].action.hvac_command;
  }
  return x;
}

Eigen::MatrixXd ModelTargets(std::span<const sim::Transition> data) {
  const auto obs = data.front().next_state.size();
  Eigen::MatrixXd y(obs + 1, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y.col(c).head(obs) = data[i].next_state;
    y(obs, c) = data[i].reward;
  }
  return y;
}

void Standardize(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
  mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  scale = (centered.array().square().rowwise().sum() / static_cast<double>(x.cols())).sqrt().matrix();
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (!(scale(i) > 1e-8)) scale(i) = 1.0;
  }
}

void TrainEpochs(DynamicsModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, int epochs,
                 int batch_size, nn::Adam& opt, Rng& rng) {
  const Eigen::MatrixXd zx = model.NormalizeInput(inputs);
  const Eigen::MatrixXd zy = model.NormalizeOutput(targets);
  const auto n = static_cast<std::size_t>(zx.cols());
  const double out_dim = static_cast<double>(zy.rows());
  std::vector<Eigen::Index> order(n);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
      const auto m = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd bx(zx.rows(), m);
      Eigen::MatrixXd by(zy.rows(), m);
      for (Eigen::Index j = 0; j < m; ++j) {
        bx.col(j) = zx.col(order[start + static_cast<std::size_t>(j)]);
        by.col(j) = zy.col(order[start + static_cast<std::size_t>(j)]);
      }
      nn::ForwardCache cache;
      const Eigen::MatrixXd pred = model.net.Forward(bx, &cache);
      const Eigen::MatrixXd grad = (2.0 / (static_cast<double>(m) * out_dim)) * (pred - by);
      opt.Step(model.net, model.net.Backward(cache, grad).grads);
    }
  }
}

}  // namespace

Eigen::MatrixXd DynamicsModel::NormalizeInput(const Eigen::MatrixXd& x) const {
  return ((x.colwise() - input_mean).array().colwise() / input_scale.array()).matrix();
}

Eigen::MatrixXd DynamicsModel::DenormalizeInput(const Eigen::MatrixXd& z) const {
  return ((z.array().colwise() * input_scale.array()).matrix()).colwise() + input_mean;
}

Eigen::MatrixXd DynamicsModel::NormalizeOutput(const Eigen::MatrixXd& y) const {
  return ((y.colwise() - output_mean).array().colwise() / output_scale.array()).matrix();
}

Eigen::MatrixXd DynamicsModel::DenormalizeOutput(const Eigen::MatrixXd& z) const {
  return ((z.array().colwise() * output_scale.array()).matrix()).colwise() + output_mean;
}

Eigen::MatrixXd DynamicsModel::Predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return DenormalizeOutput(net.Forward(NormalizeInput(x)));
}

double DynamicsModel::NormalizedMse(std::span<const sim::Transition> data) const {
  if (data.empty()) throw EmptyData("no transitions to evaluate");
  const Eigen::MatrixXd pred = net.Forward(NormalizeInput(ModelInputs(data)));
  const Eigen::MatrixXd truth = NormalizeOutput(ModelTargets(data));
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

nn::LayerTensors DynamicsLossGradient(const DynamicsModel& model, std::span<const sim::Transition> data,
                                      double* loss) {
  if (data.empty()) throw EmptyData("no transitions for the model loss");
  nn::ForwardCache cache;
  const Eigen::MatrixXd pred = model.net.Forward(model.NormalizeInput(ModelInputs(data)), &cache);
  const Eigen::MatrixXd diff = pred - model.NormalizeOutput(ModelTargets(data));
  const double denom = static_cast<double>(pred.size());
  if (loss != nullptr) *loss = diff.squaredNorm() / denom;
  return model.net.Backward(cache, (2.0 / denom) * diff).grads;
}

DynamicsModel FitDynamicsModel(std::span<const sim::Transition> data, const DynamicsFitConfig& cfg, Rng& rng) {
  if (data.empty()) throw EmptyData("cannot fit a dynamics model without transitions");
  const Eigen::MatrixXd inputs = ModelInputs(data);
  const Eigen::MatrixXd targets = ModelTargets(data);
  DynamicsModel model;
  Standardize(inputs, model.input_mean, model.input_scale);
  Standardize(targets, model.output_mean, model.output_scale);
  std::vector<int> sizes{static_cast<int>(inputs.rows())};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(static_cast<int>(targets.rows()));
  model.net = nn::Mlp::Uniform(sizes, nn::Activation::kIdentity, rng);
  nn::Adam opt(model.net, nn::AdamConfig{.learning_rate = cfg.learning_rate});
  TrainEpochs(model, inputs, targets, cfg.epochs, cfg.batch_size, opt, rng);
  return model;
}

void RefitDynamicsModel(DynamicsModel& model, std::span<const sim::Transition> data, const DynamicsFitConfig& cfg,
                        Rng& rng) {
  if (data.empty()) throw EmptyData("cannot refit a dynamics model without transitions");
  nn::Adam opt(model.net, nn::AdamConfig{.learning_rate = cfg.learning_rate});
  TrainEpochs(model, ModelInputs(data), ModelTargets(data), cfg.epochs, cfg.batch_size, opt, rng);
}

PlanResult PlanOverCandidates(const DynamicsModel& model, const Eigen::VectorXd& state,
                              const std::vector<std::vector<sim::Action>>& candidates) {
  if (candidates.empty() || candidates.front().empty()) throw EmptyData("planner needs candidate sequences");
  const std::size_t horizon = candidates.front().size();
  const auto n = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd states = state.replicate(1, n);
  Eigen::VectorXd returns = Eigen::VectorXd::Zero(n);
  const Eigen::Index sdim = state.size();
  for (std::size_t h = 0; h < horizon; ++h) {
    Eigen::MatrixXd actions(sim::kActionDim, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& seq = candidates[static_cast<std::size_t>(c)];
      if (seq.size() != horizon) throw ShapeMismatch("candidate sequences differ in length");
      const sim::Action a = seq[h].Clamped();
      actions(0, c) = a.esu_command;
      actions(1, c) = a.hvac_command;
    }
    const Eigen::MatrixXd out = model.Predict(states, actions);
    returns += out.row(sdim).transpose();
    states = out.topRows(sdim);
  }
  PlanResult result;
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < n; ++c) {
    if (returns(c) > returns(best)) best = c;
  }
  result.best = static_cast<std::size_t>(best);
  result.action = candidates[result.best].front().Clamped();
  result.predicted_returns.assign(returns.data(), returns.data() + returns.size());
  return result;
}

PlanResult RlMpcPlan(const DynamicsModel& model, const Eigen::VectorXd& state, int horizon, int candidates,
                     Rng& rng) {
  if (horizon < 1 || candidates < 1) throw InvalidRange("planner horizon and candidate count must be >= 1");
  std::vector<std::vector<sim::Action>> seqs(static_cast<std::size_t>(candidates));
  for (auto& seq : seqs) {
    seq.resize(static_cast<std::size_t>(horizon));
    for (auto& a : seq) a = {UniformIn(rng, -1.0, 1.0), UniformUnit(rng)};
  }
  return PlanOverCandidates(model, state, seqs);
}

std::vector<meta::EpisodeRecord> RunRlMpc(const sim::BuildingSpec& building, const sim::RewardConfig& reward_cfg,
                                          int episodes, const RlMpcConfig& cfg, Rng& rng) {
  sim::BuildingEnv env(building, reward_cfg);
  std::vector<sim::Transition> data;
  DynamicsModel model;
  bool fitted = false;
  long steps = 0;
  DynamicsFitConfig refit = cfg.fit;
  refit.epochs = cfg.refit_epochs;

  std::vector<meta::EpisodeRecord> records;
  for (int ep = 0; ep < episodes; ++ep) {
    env.Reset();
    meta::EpisodeRecord rec;
    while (!env.Done()) {
      sim::Action a;
      if (!fitted) {
        a = {UniformIn(rng, -1.0, 1.0), UniformUnit(rng)};
      } else {
        a = RlMpcPlan(model, env.Observe(), cfg.horizon, cfg.candidates, rng).action;
      }
      rec.prices.push_back(env.current_row().price_per_kwh);
      auto tr = env.Step(a);
      rec.total_reward += tr.reward;
      rec.net_consumption.push_back(tr.net_consumption_e);
      data.push_back(std::move(tr));
      ++steps;
      if (!fitted && steps >= cfg.warmup_hours) {
        model = FitDynamicsModel(data, cfg.fit, rng);
        fitted = true;
      } else if (fitted && cfg.refit_every_hours > 0 && (steps - cfg.warmup_hours) % cfg.refit_every_hours == 0) {
        RefitDynamicsModel(model, data, refit, rng);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace metaems::baselines
