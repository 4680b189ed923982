#include "dtstream/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "dtstream/errors.hpp"
#include "dtstream/simd/kernels.hpp"

namespace dtstream {

namespace {

constexpr const char* kCheckpointTag = "dtstream-net";
constexpr int kCheckpointVersion = 1;

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> sizes, OutputActivation output)
    : sizes_(std::move(sizes)), output_(output) {
  if (sizes_.size() < 2) throw InvalidArgument("net: need input and output sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw InvalidArgument("net: empty layer");
    Layer layer;
    layer.in = sizes_[l];
    layer.out = sizes_[l + 1];
    layer.weight_offset = offset;
    offset += layer.in * layer.out;
    layer.bias_offset = offset;
    offset += layer.out;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
}

std::span<double> DenseNet::weights(std::size_t layer) {
  const Layer& L = layers_.at(layer);
  return std::span<double>(params_).subspan(L.weight_offset, L.in * L.out);
}

std::span<double> DenseNet::biases(std::size_t layer) {
  const Layer& L = layers_.at(layer);
  return std::span<double>(params_).subspan(L.bias_offset, L.out);
}

std::span<const double> DenseNet::weights(std::size_t layer) const {
  const Layer& L = layers_.at(layer);
  return std::span<const double>(params_).subspan(L.weight_offset, L.in * L.out);
}

std::span<const double> DenseNet::biases(std::size_t layer) const {
  const Layer& L = layers_.at(layer);
  return std::span<const double>(params_).subspan(L.bias_offset, L.out);
}

void DenseNet::init_uniform(std::mt19937_64& rng, double final_bound) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(layers_[l].in));
    if (l + 1 == layers_.size() && final_bound > 0.0) bound = final_bound;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : weights(l)) w = dist(rng);
    for (double& b : biases(l)) b = dist(rng);
  }
}

bool DenseNet::same_shape(const DenseNet& other) const {
  return sizes_ == other.sizes_ && output_ == other.output_;
}

void DenseNet::forward(std::span<const double> input, std::size_t batch, Tape& tape) const {
  if (layers_.empty()) throw InvalidArgument("net: not initialized");
  if (batch == 0 || input.size() != batch * input_size()) {
    throw InvalidArgument("net: input length " + std::to_string(input.size()) +
                          " does not match batch " + std::to_string(batch) + " x " +
                          std::to_string(input_size()));
  }
  tape.batch = batch;
  tape.values.resize(sizes_.size());
  tape.values[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    std::vector<double>& y = tape.values[l + 1];
    y.resize(batch * L.out);
    simd::affine_forward(tape.values[l], weights(l), biases(l), y, {batch, L.out, L.in});
    if (l + 1 < layers_.size()) {
      simd::relu_inplace(y);
    } else if (output_ == OutputActivation::kTanh) {
      for (double& v : y) v = std::tanh(v);
    }
  }
}

std::vector<double> DenseNet::predict(std::span<const double> input) const {
  Tape tape;
  forward(input, 1, tape);
  return tape.values.back();
}

void DenseNet::backward(Tape& tape, std::span<const double> grad_output,
                        std::span<double> grad_params, std::span<double> grad_input) const {
  const std::size_t batch = tape.batch;
  if (tape.values.size() != sizes_.size() || batch == 0) {
    throw InvalidArgument("net: backward without a matching forward pass");
  }
  if (grad_output.size() != batch * output_size()) throw InvalidArgument("net: bad output gradient");
  if (grad_params.size() != params_.size()) throw InvalidArgument("net: bad parameter gradient");
  if (!grad_input.empty() && grad_input.size() != batch * input_size()) {
    throw InvalidArgument("net: bad input gradient");
  }

  std::vector<double>& delta = tape.delta;
  std::vector<double>& below = tape.delta_next;
  delta.assign(grad_output.begin(), grad_output.end());
  if (output_ == OutputActivation::kTanh) {
    const std::vector<double>& y = tape.values.back();
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - y[i] * y[i];
  }
  std::fill(grad_params.begin(), grad_params.end(), 0.0);

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const simd::GemmShape shape{batch, L.out, L.in};
    simd::affine_accumulate_weights(delta, tape.values[l],
                                    grad_params.subspan(L.weight_offset, L.in * L.out), shape);
    std::span<double> db = grad_params.subspan(L.bias_offset, L.out);
    for (std::size_t b = 0; b < batch; ++b) {
      simd::axpy(1.0, std::span<const double>(delta).subspan(b * L.out, L.out), db);
    }
    if (l == 0) {
      if (!grad_input.empty()) simd::affine_backward_input(delta, weights(l), grad_input, shape);
      break;
    }
    below.resize(batch * L.in);
    simd::affine_backward_input(delta, weights(l), below, shape);
    simd::relu_mask(tape.values[l], below);
    delta.swap(below);
  }
}

void DenseNet::save(std::ostream& os) const {
  os << kCheckpointTag << ' ' << kCheckpointVersion << '\n';
  os << "sizes";
  for (std::size_t s : sizes_) os << ' ' << s;
  os << '\n';
  os << "output " << (output_ == OutputActivation::kTanh ? "tanh" : "identity") << '\n';
  os << "params " << params_.size() << '\n';
  char buf[48];
  for (double p : params_) {
    std::snprintf(buf, sizeof buf, "%a\n", p);
    os << buf;
  }
}

DenseNet DenseNet::load(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != kCheckpointTag || version != kCheckpointVersion) {
    throw InvalidArgument("net: not a checkpoint");
  }
  std::string word;
  is >> word;
  if (word != "sizes") throw InvalidArgument("net: checkpoint lacks sizes");
  std::string line;
  std::getline(is, line);
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos < line.size()) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(line.c_str() + pos, &end, 10);
    if (end == line.c_str() + pos) break;
    sizes.push_back(static_cast<std::size_t>(v));
    pos = static_cast<std::size_t>(end - line.c_str());
  }
  std::string activation;
  if (!(is >> word >> activation) || word != "output") {
    throw InvalidArgument("net: checkpoint lacks output activation");
  }
  OutputActivation output;
  if (activation == "tanh") {
    output = OutputActivation::kTanh;
  } else if (activation == "identity") {
    output = OutputActivation::kIdentity;
  } else {
    throw InvalidArgument("net: unknown activation " + activation);
  }
  DenseNet net(std::move(sizes), output);
  std::size_t count = 0;
  if (!(is >> word >> count) || word != "params" || count != net.parameter_count()) {
    throw InvalidArgument("net: checkpoint parameter count does not match its shape");
  }
  for (double& p : net.params_) {
    std::string token;
    if (!(is >> token)) throw InvalidArgument("net: truncated checkpoint");
    char* end = nullptr;
    p = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !std::isfinite(p)) {
      throw InvalidArgument("net: bad parameter '" + token + "'");
    }
  }
  return net;
}

void soft_update(const DenseNet& primary, DenseNet& target, double tau) {
  if (!primary.same_shape(target)) throw InvalidArgument("soft update: shapes differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("soft update: tau outside [0, 1]");
  simd::blend(tau, primary.parameters(), target.parameters());
}

Optimizer::Optimizer(std::size_t size, OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw InvalidArgument("optimizer: rate must be positive");
  if (config_.kind == OptimizerKind::kAdam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<const double> grad, std::span<double> params) {
  if (grad.size() != params.size()) throw InvalidArgument("optimizer: size mismatch");
  ++steps_;
  if (config_.kind == OptimizerKind::kSgd) {
    simd::axpy(-config_.learning_rate, grad, params);
    return;
  }
  if (m_.size() != params.size()) throw InvalidArgument("optimizer: size mismatch");
  simd::AdamStep s;
  s.learning_rate = config_.learning_rate;
  s.beta1 = config_.beta1;
  s.beta2 = config_.beta2;
  s.epsilon = config_.epsilon;
  s.correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  s.correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  simd::adam_update(s, grad, m_, v_, params);
}

}  // namespace dtstream
