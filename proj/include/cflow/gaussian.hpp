#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cflow/matrix.hpp"

namespace cflow {

// Multivariate normal held through the lower Cholesky factor of its covariance.
class GaussianSpec {
 public:
  GaussianSpec() = default;

  // Independent coordinates with the given standard deviations.
  static GaussianSpec diagonal(std::vector<double> mean, std::vector<double> sd);
  static GaussianSpec isotropic(std::vector<double> mean, double sd);
  // Throws ConfigError unless `covariance` is symmetric positive definite.
  static GaussianSpec full(std::vector<double> mean, const Matrix& covariance);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const Matrix& cholesky() const { return chol_; }

  double log_pdf(std::span<const double> x) const;
  double pdf(std::span<const double> x) const;

 private:
  std::vector<double> mean_;
  Matrix chol_;
  double log_norm_ = 0.0;  // -(D/2) log 2pi - sum log L_ii
};

}  // namespace cflow
