#pragma once

#include "cflow/param_store.hpp"

namespace cflow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place, then zeroes gradients.
// Throws NumericError (parameters untouched) if any gradient is non-finite.
void adam_step(ParamStore& params, const AdamConfig& cfg);

}  // namespace cflow
