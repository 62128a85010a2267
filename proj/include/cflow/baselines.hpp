#pragma once

#include <optional>
#include <vector>

#include "cflow/flow.hpp"
#include "cflow/matrix.hpp"

namespace cflow {

struct MseModel {
  std::vector<double> mean_in;
  std::optional<std::vector<double>> mean_contr;

  std::size_t dim() const { return mean_in.size(); }
  // Column means; the contrastive mean only when that set is non-empty.
  static MseModel fit(const Matrix& inliers, const Matrix& contrastive = Matrix());
};

// |x - mean_in|^2 / D per row.
std::vector<double> mse_score(const MseModel& m, const Matrix& x);
// |x - mean_in|^2 / D - |x - mean_contr|^2 / D per row.
std::vector<double> mse_ratio_score(const MseModel& m, const Matrix& x);
// log p_contr(x) - log p_in(x) per row.
std::vector<double> ratio_score(const FlowModel& flow_in, const FlowModel& flow_contr, const Matrix& x);

}  // namespace cflow
