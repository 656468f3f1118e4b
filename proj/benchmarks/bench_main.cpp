#include <benchmark/benchmark.h>

#include "metaems/agent.hpp"
#include "metaems/metrics.hpp"
#include "metaems/neuralnet.hpp"
#include "metaems/simulator.hpp"

using namespace metaems;

namespace {

std::vector<int> Hidden(const benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  return {w, 2 * w, w};
}

sim::BuildingSpec Building(int length) {
  Rng rng(1);
  sim::BuildingSpec spec;
  spec.config = sim::SampleBuildingConfig(sim::BuildingRanges{}, rng);
  spec.trace = sim::GenerateTrace(sim::DefaultZoneProfile(1), length, rng, spec.config.solar_scale);
  return spec;
}

}  // namespace

static void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  auto sizes = Hidden(state);
  sizes.insert(sizes.begin(), sim::kObservationDim + sim::kActionDim);
  sizes.push_back(1);
  const nn::Mlp net = nn::Mlp::Uniform(sizes, nn::Activation::kIdentity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(sizes.front(), state.range(1));
  for (auto _ : state) {
    nn::ForwardCache cache;
    const Eigen::MatrixXd y = net.Forward(x, &cache);
    auto g = net.Backward(cache, y);
    benchmark::DoNotOptimize(g.grads.weights.front().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_MlpForwardBackward)->Args({32, 64})->Args({64, 128});

static void BM_AgentUpdateStep(benchmark::State& state) {
  agent::AgentConfig cfg;
  cfg.hidden_sizes = Hidden(state);
  cfg.batch_size = static_cast<int>(state.range(1));
  Rng init(1), rng(2);
  agent::ActorCritic ag(sim::kObservationDim, cfg, init);
  sim::BuildingEnv env(Building(720), sim::RewardConfig{});
  agent::ReplayBuffer buf(1000);
  agent::Rollout(ag, env, 720, true, buf, rng, /*learn=*/false);
  for (auto _ : state) ag.UpdateStep(buf, rng);
}
BENCHMARK(BM_AgentUpdateStep)->Args({32, 64})->Args({64, 128})->Unit(benchmark::kMicrosecond);

static void BM_SimulatorStep(benchmark::State& state) {
  const auto spec = Building(8760);
  sim::BuildingEnv env(spec, sim::RewardConfig{});
  Rng rng(3);
  for (auto _ : state) {
    if (env.Done()) env.Reset();
    auto tr = env.Step(sim::Action{UniformIn(rng, -1, 1), UniformUnit(rng)});
    benchmark::DoNotOptimize(tr.reward);
  }
}
BENCHMARK(BM_SimulatorStep);

static void BM_ScoreYear(benchmark::State& state) {
  Rng rng(4);
  std::vector<double> e(8760), p(8760);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = UniformIn(rng, -10, 40);
    p[i] = UniformIn(rng, 0.1, 0.5);
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::Score(e, p).cost);
}
BENCHMARK(BM_ScoreYear)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
