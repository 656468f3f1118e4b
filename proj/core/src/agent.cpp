#include "metaems/agent.hpp"

#include <algorithm>
#include <string>

#include "metaems/binary_io.hpp"
#include "metaems/errors.hpp"

namespace metaems::agent {

void AgentConfig::Validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidRange("gamma must be in [0, 1]");
  if (batch_size < 1) throw InvalidRange("batch_size must be >= 1");
  if (buffer_capacity < 1) throw InvalidRange("buffer_capacity must be >= 1");
  if (!(lr_actor >= 0.0) || !(lr_critic >= 0.0)) throw InvalidRange("learning rates must be >= 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidRange("tau must be in [0, 1]");
  if (!(exploration_noise_sigma >= 0.0)) throw InvalidRange("exploration noise must be >= 0");
  if (hidden_sizes.empty()) throw InvalidRange("at least one hidden layer is required");
  for (int h : hidden_sizes) {
    if (h < 1) throw InvalidRange("hidden layer sizes must be >= 1");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidRange("replay buffer capacity must be >= 1");
}

void ReplayBuffer::Push(sim::Transition tr) {
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(tr));
  } else {
    slots_[head_] = std::move(tr);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::Clear() {
  slots_.clear();
  head_ = 0;
  size_ = 0;
}

const sim::Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw InvalidRange("replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return slots_[(oldest + i) % capacity_];
}

std::vector<const sim::Transition*> ReplayBuffer::Sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw EmptyBatch("cannot sample from an empty replay buffer");
  std::vector<const sim::Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&slots_[UniformIndex(rng, size_)]);
  return out;
}

Batch MakeBatch(const std::vector<const sim::Transition*>& transitions) {
  if (transitions.empty()) throw EmptyBatch("batch has no transitions");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto obs = transitions.front()->state.size();
  Batch b;
  b.states.resize(obs, n);
  b.next_states.resize(obs, n);
  b.actions.resize(sim::kActionDim, n);
  b.rewards.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = *transitions[static_cast<std::size_t>(i)];
    if (tr.state.size() != obs || tr.next_state.size() != obs) throw ShapeMismatch("mixed observation sizes in batch");
    b.states.col(i) = tr.state;
    b.next_states.col(i) = tr.next_state;
    b.actions(0, i) = tr.action.esu_command;
    b.actions(1, i) = tr.action.hvac_command;
    b.rewards(i) = tr.reward;
  }
  return b;
}

sim::Action ActionFromActorOutput(const Eigen::VectorXd& out) {
  return sim::Action{out(0), 0.5 * (out(1) + 1.0)}.Clamped();
}

Eigen::MatrixXd EnvActionsFromActorOutput(const Eigen::MatrixXd& out) {
  Eigen::MatrixXd a = out;
  a.row(1) = 0.5 * (out.row(1).array() + 1.0);
  return a;
}

namespace {

Eigen::MatrixXd StackStateAction(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

}  // namespace

std::vector<int> ActorLayers(int obs_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(sim::kActionDim);
  return sizes;
}

std::vector<int> CriticLayers(int obs_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{obs_dim + sim::kActionDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

ActorCritic::ActorCritic(int obs_dim, AgentConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  cfg_.Validate();
  actor_ = nn::Mlp::Uniform(ActorLayers(obs_dim, cfg_.hidden_sizes), nn::Activation::kTanh, init_rng);
  critic_ = nn::Mlp::Uniform(CriticLayers(obs_dim, cfg_.hidden_sizes), nn::Activation::kIdentity, init_rng);
  ResetFrom(actor_, critic_);
}

ActorCritic::ActorCritic(nn::Mlp actor, nn::Mlp critic, AgentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.Validate();
  ResetFrom(actor, critic);
}

void ActorCritic::ResetFrom(const nn::Mlp& actor, const nn::Mlp& critic) {
  if (actor.output_dim() != sim::kActionDim) throw ShapeMismatch("actor must output 2 action components");
  if (critic.output_dim() != 1 || critic.input_dim() != actor.input_dim() + sim::kActionDim) {
    throw ShapeMismatch("critic must map state+action to a scalar");
  }
  actor_ = actor;
  critic_ = critic;
  target_critic_ = critic;
  actor_opt_ = nn::Adam(actor_, nn::AdamConfig{.learning_rate = cfg_.lr_actor});
  critic_opt_ = nn::Adam(critic_, nn::AdamConfig{.learning_rate = cfg_.lr_critic});
  updates_ = 0;
}

sim::Action ActorCritic::Act(const Eigen::VectorXd& state, bool explore, Rng& rng) const {
  const Eigen::VectorXd out = actor_.Forward(state);
  sim::Action a = ActionFromActorOutput(out);
  if (explore && cfg_.exploration_noise_sigma > 0.0) {
    a.esu_command += cfg_.exploration_noise_sigma * StandardNormal(rng);
    a.hvac_command += cfg_.exploration_noise_sigma * StandardNormal(rng);
  }
  return a.Clamped();
}

LossAndGrad ActorCritic::CriticLoss(const Batch& batch) const {
  if (batch.size() == 0) throw EmptyBatch("critic loss on an empty batch");
  const double n = static_cast<double>(batch.size());

  // TD target: no gradient flows through the target critic or the actor.
  const Eigen::MatrixXd next_actions = EnvActionsFromActorOutput(actor_.Forward(batch.next_states));
  const Eigen::RowVectorXd next_q = target_critic_.Forward(StackStateAction(batch.next_states, next_actions));
  const Eigen::RowVectorXd target = cfg_.reward_scale * batch.rewards + cfg_.gamma * next_q;

  nn::ForwardCache cache;
  const Eigen::RowVectorXd q = critic_.Forward(StackStateAction(batch.states, batch.actions), &cache);
  const Eigen::RowVectorXd diff = target - q;

  LossAndGrad out;
  out.loss = diff.squaredNorm() / n;
  const Eigen::MatrixXd dq = (-2.0 / n) * diff;
  out.grads = critic_.Backward(cache, dq).grads;
  return out;
}

LossAndGrad ActorCritic::ActorLoss(const Batch& batch) const {
  if (batch.size() == 0) throw EmptyBatch("actor loss on an empty batch");
  const double n = static_cast<double>(batch.size());

  nn::ForwardCache actor_cache;
  const Eigen::MatrixXd raw = actor_.Forward(batch.states, &actor_cache);
  nn::ForwardCache critic_cache;
  const Eigen::RowVectorXd q =
      critic_.Forward(StackStateAction(batch.states, EnvActionsFromActorOutput(raw)), &critic_cache);

  LossAndGrad out;
  out.loss = -q.sum() / n;
  const Eigen::MatrixXd dq = Eigen::RowVectorXd::Constant(batch.size(), -1.0 / n);
  const Eigen::MatrixXd d_input = critic_.Backward(critic_cache, dq).input_grad;
  Eigen::MatrixXd d_raw = d_input.bottomRows(sim::kActionDim);
  d_raw.row(1) *= 0.5;
  out.grads = actor_.Backward(actor_cache, d_raw).grads;
  return out;
}

void ActorCritic::UpdateOnBatch(const Batch& batch) {
  const LossAndGrad critic = CriticLoss(batch);
  critic_opt_.Step(critic_, critic.grads);
  if (phase_hook_) phase_hook_(UpdatePhase::kCritic);

  const LossAndGrad actor = ActorLoss(batch);
  actor_opt_.Step(actor_, actor.grads);
  if (phase_hook_) phase_hook_(UpdatePhase::kActor);

  nn::SoftUpdate(target_critic_, critic_, cfg_.tau);
  if (phase_hook_) phase_hook_(UpdatePhase::kTarget);
  ++updates_;
}

bool ActorCritic::UpdateStep(const ReplayBuffer& buffer, Rng& rng) {
  if (buffer.size() < static_cast<std::size_t>(cfg_.batch_size)) return false;
  UpdateOnBatch(MakeBatch(buffer.Sample(static_cast<std::size_t>(cfg_.batch_size), rng)));
  return true;
}

namespace {

constexpr std::uint32_t kAgentBlobVersion = 1;

}  // namespace

void ActorCritic::Save(std::ostream& out) const {
  io::WritePod(out, kAgentBlobVersion);
  io::WritePod(out, cfg_.gamma);
  io::WritePod<std::int32_t>(out, cfg_.batch_size);
  io::WritePod(out, cfg_.lr_actor);
  io::WritePod(out, cfg_.lr_critic);
  io::WritePod(out, cfg_.tau);
  io::WritePod(out, cfg_.exploration_noise_sigma);
  io::WritePod<std::int32_t>(out, cfg_.buffer_capacity);
  io::WritePod(out, cfg_.reward_scale);
  io::WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.hidden_sizes.size()));
  for (int h : cfg_.hidden_sizes) io::WritePod<std::int32_t>(out, h);
  io::WritePod<std::int64_t>(out, updates_);
  nn::SaveMlp(out, actor_);
  nn::SaveMlp(out, critic_);
  nn::SaveMlp(out, target_critic_);
  actor_opt_.Save(out);
  critic_opt_.Save(out);
}

ActorCritic ActorCritic::Load(std::istream& in) {
  if (io::ReadPod<std::uint32_t>(in) != kAgentBlobVersion) throw VersionMismatch("unsupported agent blob version");
  AgentConfig cfg;
  cfg.gamma = io::ReadPod<double>(in);
  cfg.batch_size = io::ReadPod<std::int32_t>(in);
  cfg.lr_actor = io::ReadPod<double>(in);
  cfg.lr_critic = io::ReadPod<double>(in);
  cfg.tau = io::ReadPod<double>(in);
  cfg.exploration_noise_sigma = io::ReadPod<double>(in);
  cfg.buffer_capacity = io::ReadPod<std::int32_t>(in);
  cfg.reward_scale = io::ReadPod<double>(in);
  const auto depth = io::ReadPod<std::uint32_t>(in);
  if (depth == 0 || depth > 32) throw IoError("implausible hidden layer count");
  cfg.hidden_sizes.resize(depth);
  for (auto& h : cfg.hidden_sizes) h = io::ReadPod<std::int32_t>(in);
  const auto updates = io::ReadPod<std::int64_t>(in);
  nn::Mlp actor = nn::LoadMlp(in);
  nn::Mlp critic = nn::LoadMlp(in);
  nn::Mlp target = nn::LoadMlp(in);
  ActorCritic agent(actor, critic, cfg);
  if (!target.SameArchitecture(critic)) throw IoError("target critic architecture differs from critic");
  agent.target_critic_ = std::move(target);
  agent.actor_opt_ = nn::Adam::Load(in);
  agent.critic_opt_ = nn::Adam::Load(in);
  agent.updates_ = updates;
  return agent;
}

bool operator==(const ActorCritic& a, const ActorCritic& b) {
  return a.actor_ == b.actor_ && a.critic_ == b.critic_ && a.target_critic_ == b.target_critic_ &&
         a.actor_opt_ == b.actor_opt_ && a.critic_opt_ == b.critic_opt_ && a.updates_ == b.updates_;
}

RolloutStats Rollout(ActorCritic& agent, sim::BuildingEnv& env, int steps, bool explore, ReplayBuffer& buffer,
                     Rng& rng, bool learn) {
  RolloutStats stats;
  for (int i = 0; i < steps && !env.Done(); ++i) {
    const sim::Action a = agent.Act(env.Observe(), explore, rng);
    sim::Transition tr = env.Step(a);
    stats.total_reward += tr.reward;
    stats.rewards.push_back(tr.reward);
    stats.net_consumption.push_back(tr.net_consumption_e);
    buffer.Push(std::move(tr));
    ++stats.steps;
    if (learn) agent.UpdateStep(buffer, rng);
  }
  return stats;
}

}  // namespace metaems::agent
