#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace dtstream {

enum class OutputActivation { kTanh, kIdentity };

// Fully connected network with ReLU hidden layers. All parameters live in one
// contiguous buffer: for each layer the row-major weight matrix (out x in)
// followed by its bias vector.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<std::size_t> sizes, OutputActivation output);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }
  OutputActivation output_activation() const { return output_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> weights(std::size_t layer);
  std::span<double> biases(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> biases(std::size_t layer) const;

  // Hidden layers U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the last layer uses
  // U(-final_bound, final_bound) when final_bound > 0. Biases start the same way.
  void init_uniform(std::mt19937_64& rng, double final_bound);

  bool same_shape(const DenseNet& other) const;

  // Activations of a batched forward pass, kept for backward().
  struct Tape {
    std::size_t batch = 0;
    // values[0] is the input, values[l + 1] the activated output of layer l.
    std::vector<std::vector<double>> values;
    std::vector<double> delta;
    std::vector<double> delta_next;

    std::span<const double> output() const { return values.back(); }
  };

  // `input` holds `batch` rows of input_size().
  void forward(std::span<const double> input, std::size_t batch, Tape& tape) const;
  std::vector<double> predict(std::span<const double> input) const;

  // Reverse pass for d(loss)/d(output) given row-wise in `grad_output`.
  // Writes parameter gradients into `grad_params` (overwritten) and, when
  // non-empty, d(loss)/d(input) into `grad_input`.
  void backward(Tape& tape, std::span<const double> grad_output, std::span<double> grad_params,
                std::span<double> grad_input) const;

  // Text checkpoint: header line, layer sizes, activation, then parameters as
  // hex floats so reloading is bit-exact.
  void save(std::ostream& os) const;
  static DenseNet load(std::istream& is);

 private:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  std::vector<std::size_t> sizes_;
  OutputActivation output_ = OutputActivation::kIdentity;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// target = tau * primary + (1 - tau) * target, elementwise.
void soft_update(const DenseNet& primary, DenseNet& target, double tau);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Gradient-descent step on a parameter buffer.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::size_t size, OptimizerConfig config);

  void step(std::span<const double> grad, std::span<double> params);
  const OptimizerConfig& config() const { return config_; }
  std::size_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

}  // namespace dtstream
