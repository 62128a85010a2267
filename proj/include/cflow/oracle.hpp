#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "cflow/flow.hpp"
#include "cflow/gaussian.hpp"

namespace cflow {

struct WeightedGaussian {
  double weight = 1.0;
  GaussianSpec spec;
};

// Non-negative combination of Gaussians (weights need not sum to one).
using GaussianMixture = std::vector<WeightedGaussian>;

double mixture_pdf(const GaussianMixture& q, std::span<const double> x);

// Tensor lattice over one or two axes. 2-D points are ordered x-major:
// index = i * ys.size() + j.
struct Grid {
  std::vector<double> xs;
  std::vector<double> ys;  // empty for 1-D

  std::size_t dim() const { return ys.empty() ? 1 : 2; }
  std::size_t size() const { return ys.empty() ? xs.size() : xs.size() * ys.size(); }
  // All points as rows of a (size x dim) matrix.
  Matrix points() const;
  bool operator==(const Grid&) const = default;
};

Grid make_grid_1d(double lo, double hi, std::size_t n);
Grid make_grid_2d(double lo, double hi, std::size_t n);

struct GridDensity {
  Grid grid;
  std::vector<double> values;
};

// Trapezoid rule over the grid (product rule in 2-D).
double trapezoid_integral(const Grid& grid, std::span<const double> values);
double trapezoid_integral(const GridDensity& d);

GridDensity gaussian_on_grid(const GaussianSpec& p, const Grid& grid);

// max(p - q, 0) / C with C its trapezoid integral. Throws ConfigError when p
// never exceeds q on the grid, or when the grid boundary still carries more
// than 1e-8 of the peak value.
GridDensity positive_difference(const GaussianSpec& p, const GaussianMixture& q, const Grid& grid);

struct Interval {
  double lo;
  double hi;
};

// Closed-form region(s) where p > q for 1-D Gaussians: roots of the quadratic
// log p(x) = log q(x). Empty when p <= q everywhere; unbounded ends are +-inf.
std::vector<Interval> difference_support_1d(const GaussianSpec& p, const GaussianSpec& q);

// Half the trapezoid integral of |a - b|; grids must be identical.
double tv_distance(const GridDensity& a, const GridDensity& b);

// exp(log_prob) of a 1-D or 2-D flow on the grid.
GridDensity model_density_on_grid(const FlowModel& model, const Grid& grid);

// Max pointwise |pbar(p, q) - pbar(p, (1 - mu) p + mu q)| on the grid.
double mixture_invariance_check(const GaussianSpec& p, const GaussianMixture& q, double mu, const Grid& grid);

// Two columns (x, density) in 1-D or three (x, y, density) in 2-D.
void write_grid_csv(std::ostream& os, const GridDensity& d);
void write_grid_csv(const std::string& path, const GridDensity& d);

}  // namespace cflow
