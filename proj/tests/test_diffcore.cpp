#include <cmath>
#include <limits>

#include "cflow/adam.hpp"
#include "cflow/error.hpp"
#include "cflow/gradcheck.hpp"
#include "cflow/mlp.hpp"
#include "doctest.h"

using namespace cflow;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * standard_normal(rng);
  return m;
}

// Loss = sum(output .* weights); its gradient w.r.t. the output is `weights`.
double weighted_output(const Mlp& net, const ParamStore& p, const Matrix& x, const Matrix& weights) {
  const Matrix y = net.forward(p, x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * weights.data()[i];
  return s;
}

std::vector<Matrix> grads_of(const ParamStore& p) {
  std::vector<Matrix> g;
  for (const auto& e : p.entries()) g.push_back(e.grad);
  return g;
}

}  // namespace

TEST_CASE("mlp_forward with zero parameters outputs zeros") {
  ParamStore p;
  Rng rng = make_rng(1);
  MlpSpec spec{.input = 3, .hidden = 4, .output = 2, .hidden_layers = 2};
  Mlp net = Mlp::create(p, "n.", spec, rng, false);
  for (auto& e : p.entries()) e.value.fill(0.0);
  const Matrix y = net.forward(p, random_matrix(5, 3, rng));
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 2);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("single identity layer passes input through") {
  ParamStore p;
  Rng rng = make_rng(2);
  MlpSpec spec{.input = 3, .hidden = 1, .output = 3, .hidden_layers = 0};
  Mlp net = Mlp::create(p, "", spec, rng, true);
  Matrix& w = p.at("w0").value;
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  const Matrix x = random_matrix(4, 3, rng);
  CHECK(net.forward(p, x) == x);
}

TEST_CASE("2-3-1 network matches hand-computed forward pass") {
  ParamStore p;
  Rng rng = make_rng(3);
  MlpSpec spec{.input = 2, .hidden = 3, .output = 1, .hidden_layers = 1, .activation = Activation::relu};
  Mlp net = Mlp::create(p, "", spec, rng, false);
  const Matrix x{{0.7, -1.3}};
  const Matrix& w0 = p.at("w0").value;
  const Matrix& b0 = p.at("b0").value;
  const Matrix& w1 = p.at("w1").value;
  const Matrix& b1 = p.at("b1").value;
  double expected = b1(0, 0);
  for (int j = 0; j < 3; ++j) {
    double h = b0(0, j) + x(0, 0) * w0(0, j) + x(0, 1) * w0(1, j);
    h = h > 0 ? h : 0.0;
    expected += h * w1(j, 0);
  }
  CHECK(std::abs(net.forward(p, x)(0, 0) - expected) < 1e-12);
}

TEST_CASE("mlp_forward rejects wrong input width") {
  ParamStore p;
  Rng rng = make_rng(4);
  Mlp net = Mlp::create(p, "", MlpSpec{.input = 2, .hidden = 3, .output = 1}, rng, false);
  CHECK_THROWS_AS(net.forward(p, Matrix(1, 3)), DimensionError);
}

TEST_CASE("mlp_backward: zero upstream gradient gives zero gradients") {
  ParamStore p;
  Rng rng = make_rng(5);
  Mlp net = Mlp::create(p, "", MlpSpec{.input = 2, .hidden = 4, .output = 3}, rng, false);
  MlpCache cache;
  const Matrix x = random_matrix(6, 2, rng);
  net.forward(p, x, &cache);
  const Matrix gin = net.backward(p, cache, Matrix(6, 3));
  for (double v : gin.values()) CHECK(v == 0.0);
  for (double v : p.flat_grads()) CHECK(v == 0.0);
}

TEST_CASE("scalar linear network: d(w x)/dw = x") {
  ParamStore p;
  Rng rng = make_rng(6);
  Mlp net = Mlp::create(p, "", MlpSpec{.input = 1, .hidden = 1, .output = 1, .hidden_layers = 0}, rng, true);
  p.at("w0").value(0, 0) = 0.5;
  MlpCache cache;
  net.forward(p, Matrix{{2.0}}, &cache);
  net.backward(p, cache, Matrix{{1.0}});
  CHECK(p.at("w0").grad(0, 0) == doctest::Approx(2.0));
  CHECK(p.at("b0").grad(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("mlp_backward rejects mismatched gradient shape") {
  ParamStore p;
  Rng rng = make_rng(7);
  Mlp net = Mlp::create(p, "", MlpSpec{.input = 2, .hidden = 3, .output = 2}, rng, false);
  MlpCache cache;
  net.forward(p, Matrix(4, 2, 0.1), &cache);
  CHECK_THROWS_AS(net.backward(p, cache, Matrix(4, 3)), DimensionError);
  CHECK_THROWS_AS(net.backward(p, MlpCache{}, Matrix(4, 2)), DimensionError);
}

TEST_CASE("backward exactness against finite differences on random small networks") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    for (Activation act : {Activation::softplus, Activation::relu}) {
      CAPTURE(seed);
      ParamStore p;
      Rng rng = make_rng(seed);
      MlpSpec spec{.input = 3, .hidden = 6, .output = 2, .hidden_layers = 2, .activation = act};
      Mlp net = Mlp::create(p, "", spec, rng, false);
      REQUIRE(p.scalar_count() <= 200);
      const Matrix x = random_matrix(5, 3, rng);
      const Matrix wts = random_matrix(5, 2, rng);
      if (act == Activation::relu) {
        // Nudge away from ReLU kinks: the central difference must not straddle 0.
        MlpCache c;
        net.forward(p, x, &c);
        bool near_kink = false;
        for (const auto& pre : c.pre_activations) {
          for (double v : pre.values()) near_kink = near_kink || std::abs(v) < 1e-3;
        }
        if (near_kink) continue;
      }
      MlpCache cache;
      net.forward(p, x, &cache);
      net.backward(p, cache, wts);
      const auto numeric = finite_difference_grad(
          [&](const ParamStore& q) { return weighted_output(net, q, x, wts); }, p, 1e-5);
      CHECK(max_relative_error(grads_of(p), numeric, 0.0) < 1e-5);
    }
  }
}

TEST_CASE("finite_difference_grad oracles") {
  ParamStore p;
  p.add("theta", Matrix{{3.0}});
  auto g = finite_difference_grad([](const ParamStore& q) { return std::pow(q.value(0)(0, 0), 2); }, p, 1e-4);
  CHECK(std::abs(g[0](0, 0) - 6.0) < 1e-6);
  g = finite_difference_grad([](const ParamStore&) { return 4.2; }, p, 1e-4);
  CHECK(g[0](0, 0) == 0.0);
  CHECK_THROWS_AS(finite_difference_grad([](const ParamStore&) { return NAN; }, p, 1e-4), NumericError);
  CHECK_THROWS_AS(finite_difference_grad([](const ParamStore&) { return 0.0; }, p, 0.0), ConfigError);
}

TEST_CASE("adam first step moves by lr * sign(g)") {
  ParamStore p;
  p.add("x", Matrix{{0.0, 1.0}});
  p.grad(0)(0, 0) = 1.0;
  p.grad(0)(0, 1) = -3.0;
  adam_step(p, AdamConfig{});
  CHECK(p.value(0)(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p.value(0)(0, 1) == doctest::Approx(1.0 + 1e-3).epsilon(1e-6));
  CHECK(p.step() == 1);
  for (double v : p.flat_grads()) CHECK(v == 0.0);
}

TEST_CASE("adam: zero gradient is a fixed point") {
  ParamStore p;
  p.add("x", Matrix{{0.25, -4.0}});
  const auto before = p.flat_values();
  AdamConfig cfg;
  for (int i = 0; i < 10; ++i) adam_step(p, cfg);
  const auto after = p.flat_values();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(after[i] - before[i]) < cfg.lr * 1e-6);
}

TEST_CASE("adam on (theta - 1)^2 increases theta toward 1 every step") {
  // Scalar simulation oracle computed independently of adam_step.
  double m = 0, v = 0, th_ref = 0;
  ParamStore p;
  p.add("theta", Matrix{{0.0}});
  double prev = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * (p.value(0)(0, 0) - 1.0);
    p.grad(0)(0, 0) = g;
    adam_step(p, AdamConfig{.lr = 0.1});
    const double gr = 2.0 * (th_ref - 1.0);
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    th_ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    const double cur = p.value(0)(0, 0);
    CHECK(cur > prev);
    CHECK(cur < 1.0);
    CHECK(std::abs(cur - th_ref) < 1e-15);
    prev = cur;
  }
}

TEST_CASE("adam rejects NaN gradients and leaves parameters unchanged") {
  ParamStore p;
  p.add("a", Matrix{{1.0}});
  p.add("b", Matrix{{2.0}});
  p.grad(0)(0, 0) = 0.5;
  p.grad(1)(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(p, AdamConfig{}), NumericError);
  CHECK(p.value(0)(0, 0) == 1.0);
  CHECK(p.value(1)(0, 0) == 2.0);
  CHECK(p.step() == 0);
}

TEST_CASE("identical seeds give bit-identical forward, backward and Adam trajectories") {
  auto run = [](std::uint64_t seed) {
    ParamStore p;
    Rng rng = make_rng(seed);
    Mlp net = Mlp::create(p, "", MlpSpec{.input = 2, .hidden = 8, .output = 2}, rng, false);
    const Matrix x = random_matrix(7, 2, rng);
    std::vector<double> trace;
    for (int s = 0; s < 3; ++s) {
      MlpCache c;
      const Matrix y = net.forward(p, x, &c);
      net.backward(p, c, y);
      trace.insert(trace.end(), y.values().begin(), y.values().end());
      const auto g = p.flat_grads();
      trace.insert(trace.end(), g.begin(), g.end());
      adam_step(p, AdamConfig{});
    }
    const auto v = p.flat_values();
    trace.insert(trace.end(), v.begin(), v.end());
    return trace;
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("ParamStore rejects duplicate and unknown names") {
  ParamStore p;
  p.add("a", Matrix(1, 1));
  CHECK_THROWS_AS(p.add("a", Matrix(1, 1)), ConfigError);
  CHECK_THROWS_AS(p.index_of("b"), ConfigError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), DimensionError);
}
