#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "metaems/agent.hpp"
#include "metaems/neuralnet.hpp"
#include "metaems/seeding.hpp"
#include "metaems/simulator.hpp"

namespace metaems::testing {

inline sim::Transition RandomTransition(int obs_dim, Rng& rng) {
  sim::Transition tr;
  tr.state = Eigen::VectorXd(obs_dim);
  tr.next_state = Eigen::VectorXd(obs_dim);
  for (int i = 0; i < obs_dim; ++i) {
    tr.state(i) = UniformIn(rng, -1, 1);
    tr.next_state(i) = UniformIn(rng, -1, 1);
  }
  tr.action = {UniformIn(rng, -1, 1), UniformIn(rng, 0, 1)};
  tr.reward = UniformIn(rng, -5, 1);
  return tr;
}

inline agent::Batch RandomBatch(int obs_dim, int n, Rng& rng) {
  std::vector<sim::Transition> store;
  for (int i = 0; i < n; ++i) store.push_back(RandomTransition(obs_dim, rng));
  std::vector<const sim::Transition*> ptrs;
  for (const auto& t : store) ptrs.push_back(&t);
  return agent::MakeBatch(ptrs);
}

// Largest relative error between `analytic` and central differences of
// `loss` over every parameter of `net`. Relative to max(|a|, |fd|, 1e-6)
// so parameters with a vanishing gradient compare absolutely. A coordinate
// whose differences at h and h/2 disagree straddles a ReLU kink; it is
// skipped and counted in *kinks.
inline double MaxRelativeGradientError(nn::Mlp& net, const nn::LayerTensors& analytic,
                                       const std::function<double()>& loss, double h = 1e-5,
                                       int* kinks = nullptr) {
  std::vector<double> flat = net.Flatten();
  nn::Mlp shape = net;
  shape.mutable_params() = analytic;
  const std::vector<double> grad = shape.Flatten();
  auto central = [&](std::size_t k, double step) {
    const double saved = flat[k];
    flat[k] = saved + step;
    net.Unflatten(flat);
    const double up = loss();
    flat[k] = saved - step;
    net.Unflatten(flat);
    const double down = loss();
    flat[k] = saved;
    return (up - down) / (2.0 * step);
  };
  double worst = 0.0;
  int skipped = 0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double fd = central(k, h);
    const double fd_half = central(k, h / 2);
    if (std::abs(fd - fd_half) > 1e-3 * std::max(std::abs(fd), 1e-6)) {
      ++skipped;
      continue;
    }
    const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[k]) / denom);
  }
  net.Unflatten(flat);
  if (kinks != nullptr) *kinks = skipped;
  return worst;
}

inline sim::BuildingSpec SmallBuilding(int zone, int length, std::uint64_t seed, const std::string& id = "b") {
  Rng rng(seed);
  sim::BuildingSpec spec;
  spec.id = id;
  spec.config = sim::SampleBuildingConfig(sim::BuildingRanges{}, rng);
  spec.trace = sim::GenerateTrace(sim::DefaultZoneProfile(zone), length, rng, spec.config.solar_scale);
  return spec;
}

inline agent::AgentConfig TinyAgentConfig() {
  agent::AgentConfig cfg;
  cfg.hidden_sizes = {8, 8};
  cfg.batch_size = 8;
  cfg.buffer_capacity = 1000;
  return cfg;
}

}  // namespace metaems::testing
