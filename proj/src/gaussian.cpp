#include "cflow/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <string>

#include "cflow/error.hpp"

namespace cflow {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_norm_of(const Matrix& chol) {
  double s = -0.5 * static_cast<double>(chol.rows()) * kLog2Pi;
  for (std::size_t i = 0; i < chol.rows(); ++i) s -= std::log(chol(i, i));
  return s;
}

}  // namespace

GaussianSpec GaussianSpec::diagonal(std::vector<double> mean, std::vector<double> sd) {
  if (mean.empty()) throw ConfigError("gaussian: dimension must be >= 1");
  if (mean.size() != sd.size()) throw DimensionError("gaussian: mean and sd lengths differ");
  GaussianSpec g;
  g.chol_ = Matrix(mean.size(), mean.size());
  for (std::size_t i = 0; i < sd.size(); ++i) {
    if (!(sd[i] > 0) || !std::isfinite(sd[i])) throw ConfigError("gaussian: standard deviations must be positive");
    g.chol_(i, i) = sd[i];
  }
  g.mean_ = std::move(mean);
  g.log_norm_ = log_norm_of(g.chol_);
  return g;
}

GaussianSpec GaussianSpec::isotropic(std::vector<double> mean, double sd) {
  const std::size_t d = mean.size();
  return diagonal(std::move(mean), std::vector<double>(d, sd));
}

GaussianSpec GaussianSpec::full(std::vector<double> mean, const Matrix& covariance) {
  const std::size_t d = mean.size();
  if (d == 0) throw ConfigError("gaussian: dimension must be >= 1");
  if (covariance.rows() != d || covariance.cols() != d) throw DimensionError("gaussian: covariance shape mismatch");
  Eigen::MatrixXd cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (std::abs(covariance(i, j) - covariance(j, i)) > 1e-12 * (1.0 + std::abs(covariance(i, j)))) {
        throw ConfigError("gaussian: covariance is not symmetric");
      }
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = covariance(i, j);
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("gaussian: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  GaussianSpec g;
  g.chol_ = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) g.chol_(i, j) = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (!(g.chol_(i, i) > 0)) throw ConfigError("gaussian: covariance is not positive definite");
  }
  g.mean_ = std::move(mean);
  g.log_norm_ = log_norm_of(g.chol_);
  return g;
}

double GaussianSpec::log_pdf(std::span<const double> x) const {
  const std::size_t d = dim();
  if (x.size() != d) {
    throw DimensionError("gaussian log_pdf: point has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(d));
  }
  // Forward substitution L y = x - mean.
  double sq = 0.0;
  std::vector<double> y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double r = x[i] - mean_[i];
    for (std::size_t j = 0; j < i; ++j) r -= chol_(i, j) * y[j];
    y[i] = r / chol_(i, i);
    sq += y[i] * y[i];
  }
  return log_norm_ - 0.5 * sq;
}

double GaussianSpec::pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

}  // namespace cflow
