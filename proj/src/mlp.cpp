#include "cflow/mlp.hpp"

#include <cmath>

#include "cflow/error.hpp"

namespace cflow {
namespace {

std::vector<std::size_t> layer_widths(const MlpSpec& spec) {
  if (spec.input == 0 || spec.output == 0 || (spec.hidden_layers > 0 && spec.hidden == 0)) {
    throw ConfigError("MLP widths must be >= 1");
  }
  std::vector<std::size_t> w{spec.input};
  for (std::size_t i = 0; i < spec.hidden_layers; ++i) w.push_back(spec.hidden);
  w.push_back(spec.output);
  return w;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void activate(Activation a, Matrix& m) {
  for (double& v : m.values()) v = a == Activation::relu ? (v > 0 ? v : 0.0) : softplus(v);
}

// grad *= act'(pre)
void activation_backward(Activation a, const Matrix& pre, Matrix& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double z = pre.data()[i];
    grad.data()[i] *= a == Activation::relu ? (z > 0 ? 1.0 : 0.0) : sigmoid(z);
  }
}

}  // namespace

std::string_view activation_name(Activation a) { return a == Activation::relu ? "relu" : "softplus"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation: " + std::string(name));
}

Mlp Mlp::create(ParamStore& params, const std::string& prefix, const MlpSpec& spec, Rng& rng,
                bool zero_last) {
  const auto widths = layer_widths(spec);
  Mlp net;
  net.spec_ = spec;
  const std::size_t layers = widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    Matrix w(fan_in, fan_out), b(1, fan_out);
    if (!(zero_last && l + 1 == layers)) {
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : w.values()) v = dist(rng);
      for (double& v : b.values()) v = dist(rng);
    }
    net.weights_.push_back(params.add(prefix + "w" + std::to_string(l), std::move(w)));
    net.biases_.push_back(params.add(prefix + "b" + std::to_string(l), std::move(b)));
  }
  return net;
}

Mlp Mlp::bind(const ParamStore& params, const std::string& prefix, const MlpSpec& spec) {
  const auto widths = layer_widths(spec);
  Mlp net;
  net.spec_ = spec;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto wi = params.index_of(prefix + "w" + std::to_string(l));
    const auto bi = params.index_of(prefix + "b" + std::to_string(l));
    if (params.value(wi).rows() != widths[l] || params.value(wi).cols() != widths[l + 1] ||
        params.value(bi).rows() != 1 || params.value(bi).cols() != widths[l + 1]) {
      throw DimensionError("parameter shapes do not match MLP spec at " + prefix);
    }
    net.weights_.push_back(wi);
    net.biases_.push_back(bi);
  }
  return net;
}

Matrix Mlp::forward(const ParamStore& params, const Matrix& input, MlpCache* cache) const {
  if (input.cols() != spec_.input) {
    throw DimensionError("mlp_forward: input has " + std::to_string(input.cols()) + " cols, expected " +
                         std::to_string(spec_.input));
  }
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = input;
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = matmul(x, params.value(weights_[l]));
    const Matrix& b = params.value(biases_[l]);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
    }
    if (cache) cache->layer_inputs.push_back(x);
    if (l + 1 == layers) return z;
    if (cache) cache->pre_activations.push_back(z);
    activate(spec_.activation, z);
    x = std::move(z);
  }
  return x;  // unreachable: layers >= 1
}

Matrix Mlp::backward(ParamStore& params, const MlpCache& cache, const Matrix& grad_output) const {
  const std::size_t layers = weights_.size();
  if (cache.layer_inputs.size() != layers || cache.pre_activations.size() + 1 != layers) {
    throw DimensionError("mlp_backward: cache does not match network");
  }
  const std::size_t n = cache.layer_inputs.front().rows();
  if (grad_output.rows() != n || grad_output.cols() != spec_.output) {
    throw DimensionError("mlp_backward: grad_output shape mismatch");
  }
  Matrix g = grad_output;
  for (std::size_t l = layers; l-- > 0;) {
    Matrix& gw = params.grad(weights_[l]);
    Matrix& gb = params.grad(biases_[l]);
    const Matrix dw = matmul_tn(cache.layer_inputs[l], g);
    for (std::size_t i = 0; i < dw.size(); ++i) gw.data()[i] += dw.data()[i];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) gb(0, c) += row[c];
    }
    Matrix gin = matmul_nt(g, params.value(weights_[l]));
    if (l > 0) activation_backward(spec_.activation, cache.pre_activations[l - 1], gin);
    g = std::move(gin);
  }
  return g;
}

}  // namespace cflow
