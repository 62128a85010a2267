#include "cflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cflow/error.hpp"

namespace cflow {

std::vector<Matrix> finite_difference_grad(const LossFn& loss, const ParamStore& params, double h) {
  if (!(h > 0)) throw ConfigError("finite_difference_grad: step must be > 0");
  ParamStore work = params;
  std::vector<Matrix> grads;
  grads.reserve(work.size());
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    Matrix g(work.value(pi).rows(), work.value(pi).cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double& x = work.at(pi).value.data()[i];
      const double orig = x;
      x = orig + h;
      const double up = loss(work);
      x = orig - h;
      const double down = loss(work);
      x = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_difference_grad: non-finite loss at " + work.at(pi).name);
      }
      g.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(const std::vector<Matrix>& analytic, const std::vector<Matrix>& numeric,
                          double abs_floor) {
  if (analytic.size() != numeric.size()) throw DimensionError("gradient lists differ in length");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    if (analytic[k].size() != numeric[k].size()) throw DimensionError("gradient shapes differ");
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k].data()[i], n = numeric[k].data()[i];
      const double diff = std::abs(a - n);
      if (diff <= abs_floor) continue;
      worst = std::max(worst, diff / std::max(std::abs(a), std::abs(n)));
    }
  }
  return worst;
}

}  // namespace cflow
