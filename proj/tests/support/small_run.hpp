#pragma once

#include "metaems/config.hpp"

namespace metaems::testing {

// Smallest experiment that still satisfies the month-length requirement.
inline config::ExperimentConfig SmallRunConfig() {
  config::ExperimentConfig cfg;
  cfg.name = "small";
  cfg.zones = {1};
  cfg.n_repeat_seeds = 2;
  cfg.n_source_buildings = 3;
  cfg.n_target_buildings = 2;
  cfg.episode_length = 720;
  cfg.test_episodes = 2;
  cfg.methods.pretrained = false;
  cfg.methods.maml = false;
  cfg.methods.rl_mpc = false;
  cfg.meta.t_theta = 240;
  cfg.meta.rounds = 1;
  cfg.agent.hidden_sizes = {8, 8};
  cfg.agent.batch_size = 8;
  cfg.agent.buffer_capacity = 2000;
  return cfg;
}

}  // namespace metaems::testing
