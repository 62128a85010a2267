#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cflow/matrix.hpp"
#include "cflow/param_store.hpp"
#include "cflow/rng.hpp"

namespace cflow {

enum class Activation { relu, softplus };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct MlpSpec {
  std::size_t input = 1;
  std::size_t hidden = 512;
  std::size_t output = 1;
  // 0 gives a single affine layer input -> output.
  std::size_t hidden_layers = 2;
  Activation activation = Activation::relu;
};

// Activations recorded by a forward pass; sufficient for the exact backward pass.
struct MlpCache {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
};

// Fully connected network whose weights live in an external ParamStore.
// Layer l computes X_l * W_l + b_l with W_l of shape (fan_in x fan_out).
class Mlp {
 public:
  Mlp() = default;

  // Registers "<prefix>w<l>" / "<prefix>b<l>" in `params`. Weights and biases
  // are uniform in +-sqrt(1/fan_in); `zero_last` zeroes the output layer.
  static Mlp create(ParamStore& params, const std::string& prefix, const MlpSpec& spec, Rng& rng,
                    bool zero_last);
  // Binds to already-registered parameters (used when loading models).
  static Mlp bind(const ParamStore& params, const std::string& prefix, const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return weights_.size(); }
  std::size_t weight_index(std::size_t l) const { return weights_[l]; }
  std::size_t bias_index(std::size_t l) const { return biases_[l]; }

  Matrix forward(const ParamStore& params, const Matrix& input, MlpCache* cache = nullptr) const;

  // Adds parameter gradients into `params` and returns d(loss)/d(input).
  Matrix backward(ParamStore& params, const MlpCache& cache, const Matrix& grad_output) const;

 private:
  MlpSpec spec_;
  std::vector<std::size_t> weights_;
  std::vector<std::size_t> biases_;
};

}  // namespace cflow
