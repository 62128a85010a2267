#include <cmath>
#include <limits>
#include <sstream>

#include "cflow/error.hpp"
#include "cflow/flow.hpp"
#include "cflow/oracle.hpp"
#include "doctest.h"

using namespace cflow;

namespace {

const GaussianSpec kP = GaussianSpec::isotropic({0.0}, 1.0);
const GaussianSpec kQ = GaussianSpec::isotropic({1.0}, 2.0);

double lp(const GaussianSpec& g, double x) { return g.log_pdf(std::vector<double>{x}); }

}  // namespace

TEST_CASE("log pdf agrees with a quadrature-normalized kernel") {
  Rng rng = make_rng(11, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const double m = 3 * standard_normal(rng), s = 0.3 + std::abs(standard_normal(rng));
    // Unnormalized kernel; the constant comes from the trapezoid rule alone.
    const Grid g = make_grid_1d(m - 12 * s, m + 12 * s, 20001);
    std::vector<double> k(g.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = std::exp(-0.5 * std::pow((g.xs[i] - m) / s, 2));
    const double z = trapezoid_integral(g, k);
    const auto spec = GaussianSpec::isotropic({m}, s);
    for (double x : {m - s, m, m + 2.5 * s}) {
      const double ref = std::exp(-0.5 * std::pow((x - m) / s, 2)) / z;
      CHECK(std::abs(spec.pdf(std::vector<double>{x}) - ref) / ref < 1e-10);
    }
  }
}

TEST_CASE("2-D full-covariance log pdf against explicit inverse") {
  Matrix cov(2, 2);
  cov(0, 0) = 2.0;
  cov(1, 1) = 1.0;
  cov(0, 1) = cov(1, 0) = 0.6;
  const auto g = GaussianSpec::full({1.0, -1.0}, cov);
  const double det = 2.0 - 0.36;
  const double x0 = 0.3 - 1.0, x1 = 0.2 + 1.0;
  const double quad = (1.0 * x0 * x0 - 2 * 0.6 * x0 * x1 + 2.0 * x1 * x1) / det;
  const double ref = -0.5 * quad - std::log(2 * M_PI) - 0.5 * std::log(det);
  CHECK(g.log_pdf(std::vector<double>{0.3, 0.2}) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("trapezoid rule is exact for linear integrands") {
  const Grid g = make_grid_1d(-1.0, 3.0, 5);
  std::vector<double> v;
  for (double x : g.xs) v.push_back(2 * x + 1);
  CHECK(trapezoid_integral(g, v) == doctest::Approx(12.0).epsilon(1e-15));
  const Grid g2 = make_grid_2d(0.0, 1.0, 3);
  CHECK(trapezoid_integral(g2, std::vector<double>(9, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(trapezoid_integral(g2, std::vector<double>(8, 1.0)), DimensionError);
  CHECK_THROWS_AS(make_grid_1d(1.0, 1.0, 10), ConfigError);
}

TEST_CASE("positive difference of the 1-D toy pair") {
  const Grid g = make_grid_1d(-8.0, 8.0, 4001);
  const auto pbar = positive_difference(kP, {{1.0, kQ}}, g);
  CHECK(trapezoid_integral(pbar) == doctest::Approx(1.0).epsilon(1e-6));
  // Support endpoints from 3x^2 + 2x - (1 + 8 ln 2) = 0.
  const double c = 1 + 8 * std::log(2.0);
  const double lo = (-2 - std::sqrt(4 + 12 * c)) / 6, hi = (-2 + std::sqrt(4 + 12 * c)) / 6;
  CHECK(lo == doctest::Approx(-1.8476).epsilon(1e-4));
  CHECK(hi == doctest::Approx(1.1809).epsilon(1e-4));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.xs[i];
    if (x < lo - 1e-3 || x > hi + 1e-3) CHECK(pbar.values[i] == 0.0);
    if (x > lo + 1e-3 && x < hi - 1e-3) CHECK(pbar.values[i] > 0.0);
  }
}

TEST_CASE("positive difference trivial and error cases") {
  const Grid g = make_grid_1d(-8.0, 8.0, 4001);
  const auto same = positive_difference(kP, {{0.0, kQ}}, g);
  for (std::size_t i = 0; i < g.size(); i += 97) {
    CHECK(same.values[i] == doctest::Approx(kP.pdf(std::vector<double>{g.xs[i]})).epsilon(1e-9));
  }
  CHECK_THROWS_AS(positive_difference(kP, {{1.0, kP}}, g), ConfigError);
  // Grid too narrow for p.
  CHECK_THROWS_AS(positive_difference(kP, {{0.0, kQ}}, make_grid_1d(-2.0, 2.0, 101)), ConfigError);
  CHECK_THROWS_AS(positive_difference(kP, {{1.0, kQ}}, make_grid_2d(-8.0, 8.0, 11)), DimensionError);
}

TEST_CASE("positive difference in 2-D integrates to one") {
  const auto p = GaussianSpec::isotropic({1.0, 1.0}, 1.0);
  const auto q = GaussianSpec::isotropic({0.0, 0.0}, 1.0);
  const auto pbar = positive_difference(p, {{1.0, q}}, make_grid_2d(-7.0, 9.0, 401));
  CHECK(trapezoid_integral(pbar) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("difference support closed forms") {
  const auto s = difference_support_1d(kP, kQ);
  REQUIRE(s.size() == 1);
  CHECK(s[0].lo == doctest::Approx(-1.8476).epsilon(1e-4));
  CHECK(s[0].hi == doctest::Approx(1.1809).epsilon(1e-4));
  for (double x : {s[0].lo, s[0].hi}) CHECK(std::abs(lp(kP, x) - lp(kQ, x)) < 1e-9);

  const auto eq = difference_support_1d(GaussianSpec::isotropic({0.0}, 1.0), GaussianSpec::isotropic({2.0}, 1.0));
  REQUIRE(eq.size() == 1);
  CHECK(eq[0].lo == -std::numeric_limits<double>::infinity());
  CHECK(eq[0].hi == 1.0);

  // Broad p: p wins in both tails.
  const auto broad = GaussianSpec::isotropic({0.5}, 3.0);
  const auto narrow = GaussianSpec::isotropic({0.0}, 1.0);
  const auto tails = difference_support_1d(broad, narrow);
  REQUIRE(tails.size() == 2);
  CHECK(tails[0].lo == -std::numeric_limits<double>::infinity());
  CHECK(tails[1].hi == std::numeric_limits<double>::infinity());
  for (double x : {tails[0].hi, tails[1].lo}) CHECK(std::abs(lp(broad, x) - lp(narrow, x)) < 1e-9);
  CHECK(lp(broad, 0.5 * (tails[0].hi + tails[1].lo)) < lp(narrow, 0.5 * (tails[0].hi + tails[1].lo)));

  CHECK_THROWS_AS(difference_support_1d(kP, kP), ConfigError);
  CHECK_THROWS_AS(difference_support_1d(GaussianSpec::isotropic({0.0, 0.0}, 1.0), kP), DimensionError);
}

TEST_CASE("total variation distance") {
  const Grid g = make_grid_1d(-8.0, 8.0, 16001);
  const auto a = gaussian_on_grid(kP, g);
  CHECK(tv_distance(a, a) == 0.0);

  const Grid box = make_grid_1d(0.0, 4.0, 4001);
  GridDensity u{box, std::vector<double>(box.size(), 0.0)}, v = u;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (box.xs[i] <= 1.0) u.values[i] = 1.0;
    if (box.xs[i] >= 2.0 && box.xs[i] <= 3.0) v.values[i] = 1.0;
  }
  CHECK(tv_distance(u, v) == doctest::Approx(1.0).epsilon(1e-3));

  // Reference by a much finer midpoint sum.
  const auto shifted = GaussianSpec::isotropic({0.1}, 1.0);
  const auto b = gaussian_on_grid(shifted, g);
  double ref = 0.0;
  const std::size_t n = 400000;
  const double h = 16.0 / n;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -8.0 + (i + 0.5) * h;
    ref += 0.5 * std::abs(kP.pdf(std::vector<double>{x}) - shifted.pdf(std::vector<double>{x})) * h;
  }
  CHECK(std::abs(tv_distance(a, b) - ref) < 1e-4);
  CHECK_THROWS_AS(tv_distance(a, gaussian_on_grid(kP, make_grid_1d(-8.0, 8.0, 101))), DimensionError);
}

TEST_CASE("model density of identity flows") {
  const FlowModel m1 = FlowModel::init(FlowConfig{.dim = 1, .blocks = 2, .hidden = 4}, 1);
  const Grid g = make_grid_1d(-8.0, 8.0, 4001);
  const auto d = model_density_on_grid(m1, g);
  CHECK(trapezoid_integral(d) == doctest::Approx(1.0).epsilon(0.01));
  const auto peak = std::max_element(d.values.begin(), d.values.end()) - d.values.begin();
  CHECK(g.xs[peak] == doctest::Approx(0.0));
  CHECK(d.values[peak] == doctest::Approx(0.3989422804014327).epsilon(1e-12));

  const FlowModel m2 = FlowModel::init(FlowConfig{.dim = 2, .blocks = 2, .hidden = 4}, 1);
  const Grid g2 = make_grid_2d(-3.0, 3.0, 61);
  const auto d2 = model_density_on_grid(m2, g2);
  // (x, y) and (y, x) and (-x, y) share the same radius.
  for (std::size_t i = 0; i < 61; i += 7)
    for (std::size_t j = 0; j < 61; j += 5) {
      CHECK(std::abs(d2.values[i * 61 + j] - d2.values[j * 61 + i]) < 1e-10);
      CHECK(std::abs(d2.values[i * 61 + j] - d2.values[(60 - i) * 61 + j]) < 1e-10);
    }

  const FlowModel m3 = FlowModel::init(FlowConfig{.dim = 3, .blocks = 2, .hidden = 4}, 1);
  CHECK_THROWS_AS(model_density_on_grid(m3, g2), DimensionError);
  CHECK_THROWS_AS(model_density_on_grid(m1, g2), DimensionError);
}

TEST_CASE("mixture invariance of the positive difference") {
  const Grid g = make_grid_1d(-8.0, 8.0, 4001);
  CHECK(mixture_invariance_check(kP, {{1.0, kQ}}, 1.0, g) == 0.0);
  for (double mu : {0.1, 0.25, 0.5, 0.9, 1.0}) CHECK(mixture_invariance_check(kP, {{1.0, kQ}}, mu, g) < 1e-10);
  const auto p2 = GaussianSpec::isotropic({1.0, 1.0}, 1.0);
  const auto q2 = GaussianSpec::isotropic({0.0, 0.0}, 1.0);
  CHECK(mixture_invariance_check(p2, {{1.0, q2}}, 0.3, make_grid_2d(-7.0, 9.0, 201)) < 1e-10);
  CHECK_THROWS_AS(mixture_invariance_check(kP, {{1.0, kQ}}, 0.0, g), ConfigError);
  CHECK_THROWS_AS(mixture_invariance_check(kP, {{1.0, kQ}}, 1.2, g), ConfigError);
}

TEST_CASE("grid CSV layout") {
  std::ostringstream one, two;
  write_grid_csv(one, GridDensity{make_grid_1d(0.0, 1.0, 2), {0.25, 0.5}});
  CHECK(one.str() == "x,density\n0,0.25\n1,0.5\n");
  write_grid_csv(two, GridDensity{make_grid_2d(0.0, 1.0, 2), {1, 2, 3, 4}});
  CHECK(two.str() == "x,y,density\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
}
