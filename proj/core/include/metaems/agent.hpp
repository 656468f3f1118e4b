#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "metaems/neuralnet.hpp"
#include "metaems/seeding.hpp"
#include "metaems/simulator.hpp"

namespace metaems::agent {

struct AgentConfig {
  double gamma = 0.99;
  int batch_size = 128;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double tau = 0.005;
  double exploration_noise_sigma = 0.1;
  int buffer_capacity = 100000;
  std::vector<int> hidden_sizes{64, 128, 64};
  // Multiplier applied to rewards inside the TD target. Keeps critic
  // targets O(1) for kW-scale rewards; it does not change the greedy policy.
  double reward_scale = 0.01;

  void Validate() const;
};

// Bounded FIFO of transitions with uniform sampling with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void Push(sim::Transition tr);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  void Clear();

  // i-th oldest transition still held.
  const sim::Transition& at(std::size_t i) const;

  std::vector<const sim::Transition*> Sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<sim::Transition> slots_;
};

// Column-major mini-batch.
struct Batch {
  Eigen::MatrixXd states;       // obs x B
  Eigen::MatrixXd actions;      // 2 x B, environment units
  Eigen::RowVectorXd rewards;   // 1 x B
  Eigen::MatrixXd next_states;  // obs x B

  Eigen::Index size() const { return states.cols(); }
};

Batch MakeBatch(const std::vector<const sim::Transition*>& transitions);

struct LossAndGrad {
  double loss = 0.0;
  nn::LayerTensors grads;
};

enum class UpdatePhase { kCritic, kActor, kTarget };

// Actor maps [-1,1]^2 to environment actions: ESU passes through,
// HVAC is rescaled to [0,1].
sim::Action ActionFromActorOutput(const Eigen::VectorXd& out);
Eigen::MatrixXd EnvActionsFromActorOutput(const Eigen::MatrixXd& out);

// Base learner: deterministic actor, critic and a soft-updated target critic.
class ActorCritic {
 public:
  ActorCritic(int obs_dim, AgentConfig cfg, Rng& init_rng);
  ActorCritic(nn::Mlp actor, nn::Mlp critic, AgentConfig cfg);

  sim::Action Act(const Eigen::VectorXd& state, bool explore, Rng& rng) const;

  // Mean squared TD error with y = r*scale + gamma * Q_target(s', actor(s')).
  LossAndGrad CriticLoss(const Batch& batch) const;
  // -mean Q(s, actor(s)); gradient w.r.t. the actor only.
  LossAndGrad ActorLoss(const Batch& batch) const;

  // One critic step, one actor step, then the soft target update. Returns
  // false (and does nothing) until the buffer holds batch_size samples.
  bool UpdateStep(const ReplayBuffer& buffer, Rng& rng);
  void UpdateOnBatch(const Batch& batch);

  // Fresh optimizer state, online and target parameters set to the given
  // initialization.
  void ResetFrom(const nn::Mlp& actor, const nn::Mlp& critic);

  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }
  const nn::Mlp& target_critic() const { return target_critic_; }
  nn::Mlp& mutable_actor() { return actor_; }
  nn::Mlp& mutable_critic() { return critic_; }
  nn::Mlp& mutable_target_critic() { return target_critic_; }
  const nn::Adam& actor_optimizer() const { return actor_opt_; }
  const nn::Adam& critic_optimizer() const { return critic_opt_; }
  const AgentConfig& config() const { return cfg_; }
  long update_count() const { return updates_; }

  void set_phase_hook(std::function<void(UpdatePhase)> hook) { phase_hook_ = std::move(hook); }

  void Save(std::ostream& out) const;
  static ActorCritic Load(std::istream& in);

  friend bool operator==(const ActorCritic& a, const ActorCritic& b);

 private:
  AgentConfig cfg_;
  nn::Mlp actor_;
  nn::Mlp critic_;
  nn::Mlp target_critic_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
  long updates_ = 0;
  std::function<void(UpdatePhase)> phase_hook_;
};

std::vector<int> ActorLayers(int obs_dim, const std::vector<int>& hidden);
std::vector<int> CriticLayers(int obs_dim, const std::vector<int>& hidden);

struct RolloutStats {
  int steps = 0;
  double total_reward = 0.0;
  std::vector<double> net_consumption;
  std::vector<double> rewards;
};

// Runs `steps` interactions (fewer if the episode ends), pushing each
// transition into `buffer` and, when `learn` is set, calling UpdateStep after
// every interaction.
RolloutStats Rollout(ActorCritic& agent, sim::BuildingEnv& env, int steps, bool explore, ReplayBuffer& buffer,
                     Rng& rng, bool learn = true);

}  // namespace metaems::agent
