#include "cflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cflow/error.hpp"

namespace cflow {
namespace {

std::vector<double> axis_weights(const std::vector<double>& axis) {
  std::vector<double> w(axis.size(), 0.0);
  for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
    const double h = axis[i + 1] - axis[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ConfigError("grid needs n >= 2 and hi > lo");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

bool on_boundary(const Grid& g, std::size_t idx) {
  if (g.dim() == 1) return idx == 0 || idx + 1 == g.xs.size();
  const std::size_t i = idx / g.ys.size(), j = idx % g.ys.size();
  return i == 0 || j == 0 || i + 1 == g.xs.size() || j + 1 == g.ys.size();
}

void check_point_dim(const Grid& g, std::size_t d, const char* op) {
  if (g.dim() != d) {
    throw DimensionError(std::string(op) + ": grid is " + std::to_string(g.dim()) + "-D, density is " +
                         std::to_string(d) + "-D");
  }
}

}  // namespace

double mixture_pdf(const GaussianMixture& q, std::span<const double> x) {
  double s = 0.0;
  for (const auto& c : q) {
    if (c.weight < 0) throw ConfigError("mixture weights must be non-negative");
    if (c.weight > 0) s += c.weight * c.spec.pdf(x);
  }
  return s;
}

Matrix Grid::points() const {
  Matrix m(size(), dim());
  if (dim() == 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  } else {
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) {
        m(i * ys.size() + j, 0) = xs[i];
        m(i * ys.size() + j, 1) = ys[j];
      }
  }
  return m;
}

Grid make_grid_1d(double lo, double hi, std::size_t n) { return Grid{linspace(lo, hi, n), {}}; }

Grid make_grid_2d(double lo, double hi, std::size_t n) {
  auto axis = linspace(lo, hi, n);
  return Grid{axis, axis};
}

double trapezoid_integral(const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.size()) throw DimensionError("trapezoid: value count does not match grid");
  const auto wx = axis_weights(grid.xs);
  if (grid.dim() == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += wx[i] * values[i];
    return s;
  }
  const auto wy = axis_weights(grid.ys);
  double s = 0.0;
  for (std::size_t i = 0; i < grid.xs.size(); ++i)
    for (std::size_t j = 0; j < grid.ys.size(); ++j) s += wx[i] * wy[j] * values[i * grid.ys.size() + j];
  return s;
}

double trapezoid_integral(const GridDensity& d) { return trapezoid_integral(d.grid, d.values); }

GridDensity gaussian_on_grid(const GaussianSpec& p, const Grid& grid) {
  check_point_dim(grid, p.dim(), "gaussian_on_grid");
  const Matrix pts = grid.points();
  GridDensity out{grid, std::vector<double>(grid.size())};
  for (std::size_t i = 0; i < pts.rows(); ++i) out.values[i] = p.pdf(pts.row(i));
  return out;
}

GridDensity positive_difference(const GaussianSpec& p, const GaussianMixture& q, const Grid& grid) {
  check_point_dim(grid, p.dim(), "positive_difference");
  for (const auto& c : q) {
    if (c.spec.dim() != p.dim()) throw DimensionError("positive_difference: mixture component dimension mismatch");
  }
  const Matrix pts = grid.points();
  GridDensity out{grid, std::vector<double>(grid.size())};
  double peak = 0.0, edge = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const double diff = p.pdf(pts.row(i)) - mixture_pdf(q, pts.row(i));
    out.values[i] = diff > 0 ? diff : 0.0;
    peak = std::max(peak, out.values[i]);
    if (on_boundary(grid, i)) edge = std::max(edge, out.values[i]);
  }
  if (peak == 0.0) throw ConfigError("positive_difference: p never exceeds q on the grid");
  if (edge >= 1e-8 * peak) throw ConfigError("positive_difference: grid does not cover the region where p > q");
  const double c = trapezoid_integral(out);
  for (double& v : out.values) v /= c;
  return out;
}

std::vector<Interval> difference_support_1d(const GaussianSpec& p, const GaussianSpec& q) {
  if (p.dim() != 1 || q.dim() != 1) throw DimensionError("difference_support_1d needs 1-D Gaussians");
  const double m1 = p.mean()[0], s1 = p.cholesky()(0, 0);
  const double m2 = q.mean()[0], s2 = q.cholesky()(0, 0);
  if (m1 == m2 && s1 == s2) throw ConfigError("difference_support_1d: identical densities have no support");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // f(x) = log p - log q = a x^2 + b x + c
  const double a = -0.5 / (s1 * s1) + 0.5 / (s2 * s2);
  const double b = m1 / (s1 * s1) - m2 / (s2 * s2);
  const double c = -0.5 * m1 * m1 / (s1 * s1) + 0.5 * m2 * m2 / (s2 * s2) + std::log(s2 / s1);
  if (s1 == s2) {
    const double root = 0.5 * (m1 + m2);
    return m1 < m2 ? std::vector<Interval>{{-inf, root}} : std::vector<Interval>{{root, inf}};
  }
  const double disc = b * b - 4 * a * c;
  if (disc <= 0) {
    // No sign change: f keeps the sign of a everywhere.
    return a > 0 ? std::vector<Interval>{{-inf, inf}} : std::vector<Interval>{};
  }
  const double sq = std::sqrt(disc);
  const double t = -0.5 * (b + std::copysign(sq, b));
  double r1 = t / a, r2 = c / t;
  if (r1 > r2) std::swap(r1, r2);
  if (a < 0) return {{r1, r2}};
  return {{-inf, r1}, {r2, inf}};
}

double tv_distance(const GridDensity& a, const GridDensity& b) {
  if (!(a.grid == b.grid)) throw DimensionError("tv_distance: grids differ");
  std::vector<double> diff(a.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(a.values[i] - b.values[i]);
  return 0.5 * trapezoid_integral(a.grid, diff);
}

GridDensity model_density_on_grid(const FlowModel& model, const Grid& grid) {
  if (grid.dim() != model.dim()) {
    throw DimensionError("model_density_on_grid: only 1-D and 2-D models on matching grids are supported");
  }
  const auto lp = log_prob(model, grid.points());
  GridDensity out{grid, std::vector<double>(lp.size())};
  for (std::size_t i = 0; i < lp.size(); ++i) out.values[i] = std::exp(lp[i]);
  return out;
}

double mixture_invariance_check(const GaussianSpec& p, const GaussianMixture& q, double mu, const Grid& grid) {
  if (!(mu > 0.0 && mu <= 1.0)) throw ConfigError("mixture_invariance_check: mu must lie in (0, 1]");
  GaussianMixture mixed{{1.0 - mu, p}};
  for (const auto& c : q) mixed.push_back({mu * c.weight, c.spec});
  const GridDensity a = positive_difference(p, q, grid);
  const GridDensity b = positive_difference(p, mixed, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  return worst;
}

void write_grid_csv(std::ostream& os, const GridDensity& d) {
  char buf[96];
  if (d.grid.dim() == 1) {
    os << "x,density\n";
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", d.grid.xs[i], d.values[i]);
      os << buf;
    }
  } else {
    os << "x,y,density\n";
    const std::size_t ny = d.grid.ys.size();
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", d.grid.xs[i / ny], d.grid.ys[i % ny], d.values[i]);
      os << buf;
    }
  }
}

void write_grid_csv(const std::string& path, const GridDensity& d) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_grid_csv(os, d);
}

}  // namespace cflow
