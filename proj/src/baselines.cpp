#include "cflow/baselines.hpp"

#include "cflow/error.hpp"

namespace cflow {
namespace {

std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> mu(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mu[j] += m(i, j);
  for (double& v : mu) v /= static_cast<double>(m.rows());
  return mu;
}

std::vector<double> sq_dist(const std::vector<double>& mu, const Matrix& x) {
  if (x.cols() != mu.size()) {
    throw DimensionError("mse: data has " + std::to_string(x.cols()) + " columns, model " + std::to_string(mu.size()));
  }
  std::vector<double> out(x.rows());
  const double inv_d = 1.0 / static_cast<double>(mu.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double d = x(i, j) - mu[j];
      s += d * d;
    }
    out[i] = s * inv_d;
  }
  return out;
}

}  // namespace

MseModel MseModel::fit(const Matrix& inliers, const Matrix& contrastive) {
  if (inliers.rows() == 0) throw DegenerateInputError("MseModel::fit: empty inlier set");
  MseModel m;
  m.mean_in = column_mean(inliers);
  if (contrastive.rows() > 0) {
    if (contrastive.cols() != inliers.cols()) throw DimensionError("MseModel::fit: sets differ in dimension");
    m.mean_contr = column_mean(contrastive);
  }
  if (!Matrix(1, m.dim(), m.mean_in).all_finite()) throw NumericError("MseModel::fit: non-finite mean");
  return m;
}

std::vector<double> mse_score(const MseModel& m, const Matrix& x) { return sq_dist(m.mean_in, x); }

std::vector<double> mse_ratio_score(const MseModel& m, const Matrix& x) {
  if (!m.mean_contr) throw ConfigError("mse_ratio_score: model has no contrastive mean");
  auto a = sq_dist(m.mean_in, x);
  const auto b = sq_dist(*m.mean_contr, x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

std::vector<double> ratio_score(const FlowModel& flow_in, const FlowModel& flow_contr, const Matrix& x) {
  if (flow_in.dim() != flow_contr.dim()) throw DimensionError("ratio_score: flows differ in dimension");
  auto a = log_prob(flow_contr, x);
  const auto b = log_prob(flow_in, x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

}  // namespace cflow
