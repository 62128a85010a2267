#include "cflow/adam.hpp"

#include <cmath>

#include "cflow/error.hpp"

namespace cflow {

void adam_step(ParamStore& params, const AdamConfig& cfg) {
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  for (const auto& p : params.entries()) {
    if (!p.grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p.name);
  }
  params.increment_step();
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params.entries()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data()[i];
      double& m = p.m.data()[i];
      double& v = p.v.data()[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      p.value.data()[i] -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    }
  }
  params.zero_grad();
}

}  // namespace cflow
