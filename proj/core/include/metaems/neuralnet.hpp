#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "metaems/seeding.hpp"

namespace metaems::nn {

enum class Activation { kIdentity, kRelu, kTanh };

// Per-layer parameter-shaped container. Used for gradients and for Adam
// moments so that the optimizer never has to care about layer layout.
struct LayerTensors {
  std::vector<Eigen::MatrixXd> weights;  // out x in
  std::vector<Eigen::VectorXd> biases;   // out

  LayerTensors& operator+=(const LayerTensors& other);
  LayerTensors& operator*=(double k);
  double SquaredNorm() const;
  bool AllZero() const;
};

// Activations recorded by a forward pass, consumed by Backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> activations;  // output of each layer (post-activation)
};

struct BackwardResult {
  LayerTensors grads;
  Eigen::MatrixXd input_grad;  // d loss / d input, one column per sample
};

// Dense feed-forward network. Hidden layers use ReLU; the output layer
// uses the configured activation (identity for critics, tanh for actors).
// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation output_activation);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static Mlp Uniform(std::vector<int> layer_sizes, Activation output_activation, Rng& rng);

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  std::size_t num_layers() const { return params_.weights.size(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation output_activation() const { return output_activation_; }

  const LayerTensors& params() const { return params_; }
  LayerTensors& mutable_params() { return params_; }

  Eigen::MatrixXd Forward(const Eigen::MatrixXd& input, ForwardCache* cache = nullptr) const;
  Eigen::VectorXd Forward(const Eigen::VectorXd& input) const;

  BackwardResult Backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const;

  LayerTensors ZerosLike() const;
  std::size_t ParameterCount() const;
  std::vector<double> Flatten() const;
  void Unflatten(const std::vector<double>& flat);

  bool SameArchitecture(const Mlp& other) const;
  bool AllFinite() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<int> layer_sizes_;
  Activation output_activation_ = Activation::kIdentity;
  LayerTensors params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg);

  // One bias-corrected Adam update of `net` using `grads`. Layers marked
  // frozen keep their parameters (and moments) untouched.
  void Step(Mlp& net, const LayerTensors& grads);

  void SetFrozen(std::size_t layer, bool frozen);
  bool IsFrozen(std::size_t layer) const;

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& mutable_config() { return cfg_; }
  long step_count() const { return step_; }
  const LayerTensors& first_moment() const { return m_; }
  const LayerTensors& second_moment() const { return v_; }

  void Save(std::ostream& out) const;
  static Adam Load(std::istream& in);

  friend bool operator==(const Adam& a, const Adam& b);

 private:
  AdamConfig cfg_;
  long step_ = 0;
  LayerTensors m_;
  LayerTensors v_;
  std::vector<bool> frozen_;
};

// target <- (1 - tau) * target + tau * online
void SoftUpdate(Mlp& target, const Mlp& online, double tau);

void SaveMlp(std::ostream& out, const Mlp& net);
Mlp LoadMlp(std::istream& in);

}  // namespace metaems::nn
