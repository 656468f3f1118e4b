#include "metaems/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metaems/binary_io.hpp"
#include "metaems/errors.hpp"

namespace metaems::nn {

namespace {

Eigen::MatrixXd Apply(Activation act, Eigen::MatrixXd z) {
  switch (act) {
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kIdentity:
      break;
  }
  return z;
}

// Derivative of the activation expressed through its output, which is what
// the cache keeps.
Eigen::MatrixXd DerivFromOutput(Activation act, const Eigen::MatrixXd& y) {
  switch (act) {
    case Activation::kRelu:
      return (y.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh:
      return (1.0 - y.array().square()).matrix();
    case Activation::kIdentity:
      break;
  }
  return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

void RequireSameShape(const LayerTensors& a, const LayerTensors& b) {
  if (a.weights.size() != b.weights.size()) throw ShapeMismatch("layer count differs");
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i].rows() != b.weights[i].rows() || a.weights[i].cols() != b.weights[i].cols() ||
        a.biases[i].size() != b.biases[i].size()) {
      throw ShapeMismatch("layer " + std::to_string(i) + " shape differs");
    }
  }
}

}  // namespace

LayerTensors& LayerTensors::operator+=(const LayerTensors& other) {
  RequireSameShape(*this, other);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  return *this;
}

LayerTensors& LayerTensors::operator*=(double k) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= k;
    biases[i] *= k;
  }
  return *this;
}

double LayerTensors::SquaredNorm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i].squaredNorm() + biases[i].squaredNorm();
  return s;
}

bool LayerTensors::AllZero() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].isZero(0.0) || !biases[i].isZero(0.0)) return false;
  }
  return true;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation output_activation)
    : layer_sizes_(std::move(layer_sizes)), output_activation_(output_activation) {
  if (layer_sizes_.size() < 2) throw ShapeMismatch("an MLP needs at least input and output sizes");
  for (int n : layer_sizes_) {
    if (n <= 0) throw ShapeMismatch("layer sizes must be positive");
  }
  params_ = ZerosLike();
}

Mlp Mlp::Uniform(std::vector<int> layer_sizes, Activation output_activation, Rng& rng) {
  Mlp net(std::move(layer_sizes), output_activation);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.layer_sizes_[l]));
    auto& w = net.params_.weights[l];
    auto& b = net.params_.biases[l];
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = UniformIn(rng, -bound, bound);
    }
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = UniformIn(rng, -bound, bound);
  }
  return net;
}

Eigen::MatrixXd Mlp::Forward(const Eigen::MatrixXd& input, ForwardCache* cache) const {
  if (input.rows() != input_dim()) {
    throw ShapeMismatch("input has " + std::to_string(input.rows()) + " rows, network expects " +
                        std::to_string(input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  Eigen::MatrixXd x = input;
  const std::size_t n = num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::MatrixXd z = params_.weights[l] * x;
    z.colwise() += params_.biases[l];
    const Activation act = (l + 1 == n) ? output_activation_ : Activation::kRelu;
    Eigen::MatrixXd y = Apply(act, std::move(z));
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->activations.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& input) const {
  Eigen::MatrixXd batch = input;
  return Forward(batch, nullptr).col(0);
}

BackwardResult Mlp::Backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const {
  const std::size_t n = num_layers();
  if (cache.activations.size() != n) throw ShapeMismatch("forward cache does not match network depth");
  if (output_grad.rows() != output_dim() || output_grad.cols() != cache.activations.back().cols()) {
    throw ShapeMismatch("output gradient shape does not match forward pass");
  }
  BackwardResult result;
  result.grads.weights.resize(n);
  result.grads.biases.resize(n);
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = n; l-- > 0;) {
    const Activation act = (l + 1 == n) ? output_activation_ : Activation::kRelu;
    delta = delta.cwiseProduct(DerivFromOutput(act, cache.activations[l]));
    result.grads.weights[l] = delta * cache.inputs[l].transpose();
    result.grads.biases[l] = delta.rowwise().sum();
    delta = params_.weights[l].transpose() * delta;
  }
  result.input_grad = std::move(delta);
  return result;
}

LayerTensors Mlp::ZerosLike() const {
  LayerTensors t;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    t.weights.emplace_back(Eigen::MatrixXd::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
    t.biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes_[l + 1]));
  }
  return t;
}

std::size_t Mlp::ParameterCount() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    count += static_cast<std::size_t>(params_.weights[l].size() + params_.biases[l].size());
  }
  return count;
}

std::vector<double> Mlp::Flatten() const {
  std::vector<double> flat;
  flat.reserve(ParameterCount());
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto& w = params_.weights[l];
    flat.insert(flat.end(), w.data(), w.data() + w.size());
    const auto& b = params_.biases[l];
    flat.insert(flat.end(), b.data(), b.data() + b.size());
  }
  return flat;
}

void Mlp::Unflatten(const std::vector<double>& flat) {
  if (flat.size() != ParameterCount()) throw ShapeMismatch("flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    auto& w = params_.weights[l];
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), w.size(), w.data());
    pos += static_cast<std::size_t>(w.size());
    auto& b = params_.biases[l];
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), b.size(), b.data());
    pos += static_cast<std::size_t>(b.size());
  }
}

bool Mlp::SameArchitecture(const Mlp& other) const {
  return layer_sizes_ == other.layer_sizes_ && output_activation_ == other.output_activation_;
}

bool Mlp::AllFinite() const {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (!params_.weights[l].allFinite() || !params_.biases[l].allFinite()) return false;
  }
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (!a.SameArchitecture(b)) return false;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    if (a.params_.weights[l] != b.params_.weights[l] || a.params_.biases[l] != b.params_.biases[l]) {
      return false;
    }
  }
  return true;
}

Adam::Adam(const Mlp& net, AdamConfig cfg)
    : cfg_(cfg), m_(net.ZerosLike()), v_(net.ZerosLike()), frozen_(net.num_layers(), false) {}

void Adam::Step(Mlp& net, const LayerTensors& grads) {
  auto& params = net.mutable_params();
  RequireSameShape(params, grads);
  RequireSameShape(params, m_);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double lr = cfg_.learning_rate;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double eps = cfg_.epsilon;
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (frozen_[l]) continue;
    update(params.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
    update(params.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
  }
}

void Adam::SetFrozen(std::size_t layer, bool frozen) { frozen_.at(layer) = frozen; }

bool Adam::IsFrozen(std::size_t layer) const { return frozen_.at(layer); }

namespace {

void SaveTensors(std::ostream& out, const LayerTensors& t) {
  io::WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(t.weights.size()));
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    io::WritePod<std::int64_t>(out, t.weights[l].rows());
    io::WritePod<std::int64_t>(out, t.weights[l].cols());
    io::WriteDoubles(out, t.weights[l].data(), static_cast<std::size_t>(t.weights[l].size()));
    io::WriteDoubles(out, t.biases[l].data(), static_cast<std::size_t>(t.biases[l].size()));
  }
}

LayerTensors LoadTensors(std::istream& in) {
  LayerTensors t;
  const auto n = io::ReadPod<std::uint32_t>(in);
  if (n > 64) throw IoError("implausible layer count");
  for (std::uint32_t l = 0; l < n; ++l) {
    const auto rows = io::ReadPod<std::int64_t>(in);
    const auto cols = io::ReadPod<std::int64_t>(in);
    if (rows <= 0 || cols <= 0 || rows > (1 << 20) || cols > (1 << 20)) throw IoError("implausible layer shape");
    auto w = io::ReadDoubles(in);
    auto b = io::ReadDoubles(in);
    if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows)) {
      throw IoError("layer payload does not match its declared shape");
    }
    t.weights.emplace_back(Eigen::Map<Eigen::MatrixXd>(w.data(), rows, cols));
    t.biases.emplace_back(Eigen::Map<Eigen::VectorXd>(b.data(), rows));
  }
  return t;
}

}  // namespace

void Adam::Save(std::ostream& out) const {
  io::WritePod(out, cfg_.learning_rate);
  io::WritePod(out, cfg_.beta1);
  io::WritePod(out, cfg_.beta2);
  io::WritePod(out, cfg_.epsilon);
  io::WritePod<std::int64_t>(out, step_);
  SaveTensors(out, m_);
  SaveTensors(out, v_);
  io::WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(frozen_.size()));
  for (bool f : frozen_) io::WritePod<std::uint8_t>(out, f ? 1 : 0);
}

Adam Adam::Load(std::istream& in) {
  Adam opt;
  opt.cfg_.learning_rate = io::ReadPod<double>(in);
  opt.cfg_.beta1 = io::ReadPod<double>(in);
  opt.cfg_.beta2 = io::ReadPod<double>(in);
  opt.cfg_.epsilon = io::ReadPod<double>(in);
  opt.step_ = io::ReadPod<std::int64_t>(in);
  opt.m_ = LoadTensors(in);
  opt.v_ = LoadTensors(in);
  RequireSameShape(opt.m_, opt.v_);
  const auto n = io::ReadPod<std::uint32_t>(in);
  if (n != opt.m_.weights.size()) throw IoError("optimizer frozen mask does not match layer count");
  opt.frozen_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) opt.frozen_[i] = io::ReadPod<std::uint8_t>(in) != 0;
  return opt;
}

bool operator==(const Adam& a, const Adam& b) {
  if (a.step_ != b.step_ || a.frozen_ != b.frozen_ || a.cfg_.learning_rate != b.cfg_.learning_rate ||
      a.cfg_.beta1 != b.cfg_.beta1 || a.cfg_.beta2 != b.cfg_.beta2 || a.cfg_.epsilon != b.cfg_.epsilon ||
      a.m_.weights.size() != b.m_.weights.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.m_.weights.size(); ++l) {
    if (a.m_.weights[l] != b.m_.weights[l] || a.m_.biases[l] != b.m_.biases[l] ||
        a.v_.weights[l] != b.v_.weights[l] || a.v_.biases[l] != b.v_.biases[l]) {
      return false;
    }
  }
  return true;
}

void SoftUpdate(Mlp& target, const Mlp& online, double tau) {
  if (!target.SameArchitecture(online)) throw ShapeMismatch("soft update between different architectures");
  auto& t = target.mutable_params();
  const auto& o = online.params();
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    t.weights[l] = (1.0 - tau) * t.weights[l] + tau * o.weights[l];
    t.biases[l] = (1.0 - tau) * t.biases[l] + tau * o.biases[l];
  }
}

void SaveMlp(std::ostream& out, const Mlp& net) {
  io::WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (int n : net.layer_sizes()) io::WritePod<std::int32_t>(out, n);
  io::WritePod<std::uint8_t>(out, static_cast<std::uint8_t>(net.output_activation()));
  const auto flat = net.Flatten();
  io::WriteDoubles(out, flat.data(), flat.size());
}

Mlp LoadMlp(std::istream& in) {
  const auto depth = io::ReadPod<std::uint32_t>(in);
  if (depth < 2 || depth > 64) throw IoError("implausible network depth");
  std::vector<int> sizes(depth);
  for (auto& n : sizes) {
    n = io::ReadPod<std::int32_t>(in);
    if (n <= 0 || n > (1 << 20)) throw IoError("implausible layer size");
  }
  const auto act = io::ReadPod<std::uint8_t>(in);
  if (act > static_cast<std::uint8_t>(Activation::kTanh)) throw IoError("unknown activation code");
  Mlp net(std::move(sizes), static_cast<Activation>(act));
  const auto flat = io::ReadDoubles(in);
  if (flat.size() != net.ParameterCount()) throw IoError("parameter payload does not match architecture");
  net.Unflatten(flat);
  return net;
}

}  // namespace metaems::nn
