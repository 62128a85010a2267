#pragma once

#include <functional>
#include <vector>

#include "cflow/matrix.hpp"
#include "cflow/param_store.hpp"

namespace cflow {

using LossFn = std::function<double(const ParamStore&)>;

// Central differences (L(p + h) - L(p - h)) / 2h for every scalar parameter.
// Result is parallel to params.entries(). Throws NumericError on a non-finite loss.
std::vector<Matrix> finite_difference_grad(const LossFn& loss, const ParamStore& params, double h);

// Worst |a - n| / max(|a|, |n|) across coordinates; coordinates whose
// absolute difference is within `abs_floor` count as exact.
double max_relative_error(const std::vector<Matrix>& analytic, const std::vector<Matrix>& numeric,
                          double abs_floor = 1e-8);

}  // namespace cflow
