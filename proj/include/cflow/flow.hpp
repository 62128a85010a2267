#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cflow/matrix.hpp"
#include "cflow/mlp.hpp"
#include "cflow/param_store.hpp"

namespace cflow {

struct FlowConfig {
  std::size_t dim = 1;
  std::size_t blocks = 8;
  std::size_t hidden = 512;
  std::size_t hidden_layers = 2;
  // Soft clamp amplitude: effective log-scale = clamp * tanh(raw / clamp).
  double clamp = 3.0;
  Activation activation = Activation::relu;
};

// Number of tanh components in the monotone map of a one-dimensional block.
inline constexpr std::size_t kScalarComponents = 8;

// One block of the flow, data -> latent direction:
//   dim >= 2: permute, keep the first ceil(D/2) coordinates (the conditioner
//             input) and map the rest as a * exp(s(c)) + t(c).
//   dim == 1: u = x + sum_k (beta_k / w_k) tanh(w_k x + b_k), then
//             u * exp(s) + t with learned constants s, t.
struct FlowBlock {
  std::vector<std::uint32_t> perm;  // block input column perm[j] feeds position j
  Mlp net;                          // dim >= 2
  // dim == 1 parameter indices
  std::size_t mix = 0;        // rho_k, beta_k = (exp(rho_k) - 1) / K
  std::size_t log_width = 0;  // log w_k
  std::size_t offset = 0;     // b_k
  std::size_t scale = 0;      // raw s
  std::size_t shift = 0;      // t
  // All parameter indices owned by the block, in declaration order.
  std::vector<std::size_t> param_indices;
};

class FlowModel {
 public:
  // Deterministic given the seed. Output layers of the conditioners (and the
  // 1-D mixing weights) start at zero so every block is a pure permutation.
  static FlowModel init(const FlowConfig& cfg, std::uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }
  std::size_t conditioner_dims() const { return (cfg_.dim + 1) / 2; }
  std::size_t transformed_dims() const { return cfg_.dim / 2; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const std::vector<FlowBlock>& blocks() const { return blocks_; }

  void set_permutation(std::size_t block, std::vector<std::uint32_t> perm);

 private:
  FlowConfig cfg_;
  ParamStore params_;
  std::vector<FlowBlock> blocks_;
};

// Parameter count implied by a configuration.
std::size_t flow_parameter_count(const FlowConfig& cfg);

struct LatentResult {
  Matrix z;
  std::vector<double> logdet;
};

// z = T^{-1}(x) and log|det dz/dx| per sample.
LatentResult forward_latent(const FlowModel& model, const Matrix& x);

// log p(x) = -|z|^2 / 2 - (D/2) log(2 pi) + logdet.
std::vector<double> log_prob(const FlowModel& model, const Matrix& x);

Matrix inverse(const FlowModel& model, const Matrix& z);

// z ~ N(0, I) drawn from `seed`, mapped through inverse().
Matrix sample(const FlowModel& model, std::size_t n, std::uint64_t seed);

// Intermediate values of one block needed by the backward pass.
struct BlockRecord {
  Matrix permuted;   // block input after permutation (dim >= 2) or raw input (dim == 1)
  MlpCache mlp;
  Matrix raw_scale;  // dim >= 2: conditioner log-scale output before clamping
  Matrix shift;
};

struct FlowRecord {
  LatentResult latent;
  std::vector<BlockRecord> blocks;
};

FlowRecord forward_recorded(const FlowModel& model, const Matrix& x);

// Per-sample negative log-likelihood from a recorded pass.
std::vector<double> nll_from(const FlowRecord& rec);

// Adds d/dtheta of sum_i weights[i] * nll_i into the model's gradients.
void backward_weighted(FlowModel& model, const FlowRecord& rec, std::span<const double> weights);

// Zeroes gradients, then accumulates the gradient of the batch-mean NLL.
// Returns the mean NLL.
double log_prob_backward(FlowModel& model, const Matrix& x);

}  // namespace cflow
