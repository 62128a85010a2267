#include <algorithm>
#include <cmath>
#include <limits>

#include "cflow/datasets.hpp"
#include "cflow/error.hpp"
#include "cflow/gradcheck.hpp"
#include "cflow/metrics.hpp"
#include "cflow/oracle.hpp"
#include "cflow/training.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cflow;

namespace {

Matrix normal_rows(std::size_t n, std::size_t d, double mean, double sd, std::uint64_t seed) {
  return gen_gaussian(GaussianSpec::isotropic(std::vector<double>(d, mean), sd), n, seed).data;
}

FlowConfig tiny(std::size_t dim, Activation act = Activation::relu) {
  return FlowConfig{.dim = dim, .blocks = 3, .hidden = 8, .hidden_layers = 2, .clamp = 3.0, .activation = act};
}

void perturb(FlowModel& m, double scale, std::uint64_t seed) {
  Rng rng = make_rng(seed, 5);
  for (auto& p : m.params().entries())
    for (double& v : p.value.values()) v += scale * standard_normal(rng);
}

TrainConfig quick(Objective o, std::size_t epochs) {
  TrainConfig c;
  c.batch = 64;
  c.lr = 3e-3;
  c.max_epochs = epochs;
  c.val_fraction = 0.0;
  c.objective = o;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("nll objective of the identity model") {
  FlowModel m = FlowModel::init(tiny(1), 1);
  Matrix x(1, 1);
  CHECK(nll_objective(m, x) == doctest::Approx(0.91893853320467274).epsilon(1e-14));
  CHECK_THROWS_AS(nll_objective(m, Matrix(0, 1)), ConfigError);
}

TEST_CASE("duplicated batch leaves loss and gradient unchanged") {
  FlowModel m = FlowModel::init(tiny(2), 2);
  perturb(m, 0.2, 1);
  const Matrix x = normal_rows(16, 2, 0.0, 1.0, 3);
  const double single = nll_objective(m, x);
  const auto g1 = m.params().flat_grads();
  const double twice = nll_objective(m, vstack(x, x));
  const auto g2 = m.params().flat_grads();
  CHECK(twice == doctest::Approx(single).epsilon(1e-14));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-12));
}

TEST_CASE("Adam on N(0,1) data lowers the loss almost every step") {
  FlowModel m = FlowModel::init(tiny(1), 3);
  const Matrix x = normal_rows(256, 1, 0.0, 1.0, 4);
  AdamConfig adam;
  double prev = nll_objective(m, x);
  int decreases = 0;
  for (int step = 0; step < 50; ++step) {
    adam_step(m.params(), adam);
    const double now = nll_objective(m, x);
    decreases += now < prev;
    prev = now;
  }
  CHECK(decreases >= 45);
}

TEST_CASE("fully saturated clamp reduces to the NLL objective") {
  FlowModel a = FlowModel::init(tiny(2), 4);
  perturb(a, 0.1, 2);
  FlowModel b = a;
  const Matrix x = normal_rows(32, 2, 0.0, 1.0, 5);
  const Matrix y = normal_rows(32, 2, 0.0, 3.0, 6);
  const double nll = nll_objective(a, x);
  const double tau = -5.0;  // every contrastive NLL is far above this
  const double con = contrastive_objective(b, x, y, tau);
  CHECK(con == nll - tau);
  CHECK(a.params().flat_grads() == b.params().flat_grads());
}

TEST_CASE("identical batches with an infinite clamp cancel") {
  FlowModel m = FlowModel::init(tiny(2), 5);
  perturb(m, 0.1, 3);
  const Matrix x = normal_rows(20, 2, 0.5, 1.0, 7);
  CHECK(contrastive_objective(m, x, x, std::numeric_limits<double>::infinity()) == 0.0);
  for (double g : m.params().flat_grads()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("contrastive gradient matches finite differences across the clamp") {
  for (std::size_t dim : {1u, 2u, 3u}) {
    FlowModel m = FlowModel::init(tiny(dim, Activation::softplus), 6 + dim);
    perturb(m, 0.15, dim);
    const Matrix x = normal_rows(12, dim, 0.0, 1.0, 8);
    const Matrix y = normal_rows(12, dim, 1.0, 2.0, 9);
    // Threshold halfway between two neighbouring contrastive NLLs, so some
    // samples saturate and none sits on the kink.
    auto nll = log_prob(m, y);
    for (double& v : nll) v = -v;
    std::sort(nll.begin(), nll.end());
    const double tau = 0.5 * (nll[5] + nll[6]);
    REQUIRE(nll[6] - nll[5] > 1e-3);

    contrastive_objective(m, x, y, tau);
    std::vector<Matrix> analytic;
    for (const auto& p : m.params().entries()) analytic.push_back(p.grad);
    const LossFn loss = [&](const ParamStore& ps) {
      FlowModel probe = m;
      probe.params().assign_flat_values(ps.flat_values());
      return contrastive_objective(probe, x, y, tau);
    };
    const auto numeric = finite_difference_grad(loss, m.params(), 1e-6);
    // The two terms nearly cancel on some coordinates; there the central
    // difference round-off (~1e-9 absolute) swamps a relative comparison.
    CHECK(max_relative_error(analytic, numeric, 1e-8) < 1e-5);
  }
}

TEST_CASE("contrastive objective errors") {
  FlowModel m = FlowModel::init(tiny(2), 1);
  CHECK_THROWS_AS(contrastive_objective(m, normal_rows(3, 2, 0, 1, 1), Matrix(0, 2), 0.0), ConfigError);
  CHECK_THROWS_AS(contrastive_objective(m, normal_rows(3, 2, 0, 1, 1), normal_rows(3, 3, 0, 1, 1), 0.0),
                  DimensionError);
}

TEST_CASE("NLL training finds the mode of N(3,1)") {
  const Matrix x = normal_rows(4000, 1, 3.0, 1.0, 12);
  auto cfg = quick(Objective::nll, 40);
  cfg.batch = 256;
  cfg.lr = 1e-2;
  const auto res = train(FlowModel::init(FlowConfig{.dim = 1, .blocks = 4}, 1), x, Matrix(0, 1), cfg);
  const auto d = model_density_on_grid(res.model, make_grid_1d(-2.0, 8.0, 2001));
  const auto peak = std::max_element(d.values.begin(), d.values.end()) - d.values.begin();
  CHECK(std::abs(d.grid.xs[peak] - 3.0) < 0.1);
  CHECK(res.history.epochs() == 40);
  CHECK(res.history.best_epoch == 40);
}

TEST_CASE("zero epochs return the input model") {
  FlowModel m = FlowModel::init(tiny(2), 2);
  perturb(m, 0.1, 9);
  const auto res = train(m, normal_rows(50, 2, 0, 1, 1), normal_rows(50, 2, 0, 2, 2), quick(Objective::contrastive, 0));
  CHECK(res.model.params().flat_values() == m.params().flat_values());
  CHECK(res.history.epochs() == 0);
  CHECK(res.history.best_epoch == 0);
}

TEST_CASE("training is deterministic and seed sensitive") {
  const Matrix x = normal_rows(300, 2, 0, 1, 1), y = normal_rows(300, 2, 0, 2, 2);
  auto cfg = quick(Objective::contrastive, 3);
  cfg.val_fraction = 0.2;
  const auto init = FlowModel::init(tiny(2), 3);
  const auto a = train(init, x, y, cfg), b = train(init, x, y, cfg);
  CHECK(a.model.params().flat_values() == b.model.params().flat_values());
  cfg.seed = 12;
  CHECK_FALSE(train(init, x, y, cfg).model.params().flat_values() == a.model.params().flat_values());
}

TEST_CASE("saturated contrastive training is bit identical to NLL training") {
  const Matrix x = normal_rows(500, 1, 0, 1, 1), y = normal_rows(500, 1, 1, 2, 2);
  auto cfg = quick(Objective::contrastive, 5);
  cfg.val_fraction = 0.1;
  cfg.clamp_tau = 0.0;  // 1-D densities here stay far below 1
  const auto init = FlowModel::init(FlowConfig{.dim = 1, .blocks = 4}, 3);
  const auto con = train(init, x, y, cfg);
  cfg.objective = Objective::nll;
  const auto nll = train(init, x, y, cfg);
  CHECK(con.model.params().flat_values() == nll.model.params().flat_values());
  CHECK(con.history.best_epoch == nll.history.best_epoch);
  CHECK(con.history.proxy_auroc == nll.history.proxy_auroc);
}

TEST_CASE("degenerate contrastive set gives chance-level proxy AUROC") {
  const Matrix x = normal_rows(4000, 2, 0, 1, 1), y = normal_rows(4000, 2, 0, 1, 2);
  auto cfg = quick(Objective::contrastive, 5);
  cfg.batch = 256;
  cfg.clamp_tau = 30.0;
  const auto res = train(FlowModel::init(tiny(2), 5), x, y, cfg);
  const double a = proxy_auroc(res.model, normal_rows(2000, 2, 0, 1, 3), normal_rows(2000, 2, 0, 1, 4));
  CHECK(std::abs(a - 0.5) < 0.05);
}

TEST_CASE("proxy AUROC fixtures") {
  const auto m = FlowModel::init(tiny(1), 1);
  // Identity scores grow with |x|.
  CHECK(proxy_auroc(m, Matrix{{0.1}, {-0.2}}, Matrix{{5.0}, {-6.0}}) == 1.0);
  CHECK(proxy_auroc(m, Matrix{{1.0}, {3.0}}, Matrix{{2.0}, {4.0}}) == 0.75);
  CHECK_THROWS_AS(proxy_auroc(m, Matrix(0, 1), Matrix{{1.0}}), DegenerateInputError);
}

TEST_CASE("epsilon selection") {
  const auto m = FlowModel::init(tiny(1), 1);
  const double x0 = std::sqrt(2 * (1.0 - 0.91893853320467274));  // log density -1
  const Matrix val(5, 1, x0);
  const auto e = select_epsilon(m, val, 0.1, 2.3);
  CHECK(e.epsilon == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(e.tau == doctest::Approx(-1.3).epsilon(1e-12));
  CHECK(select_epsilon(m, val, 0.1, 0.0).epsilon == doctest::Approx(-1.0).epsilon(1e-12));
  // Interpolated quantile.
  const auto q = select_epsilon(m, Matrix{{0.0}, {1.0}, {2.0}}, 0.25, 0.0);
  const double lp1 = -0.91893853320467274 - 0.5, lp2 = -0.91893853320467274 - 2.0;
  CHECK(q.epsilon == doctest::Approx(lp2 + 0.5 * (lp1 - lp2)).epsilon(1e-12));
  CHECK_THROWS_AS(select_epsilon(m, Matrix(0, 1)), DegenerateInputError);
}

TEST_CASE("epsilon from an NLL flow on the 1-D toy lies below the peak of the positive difference") {
  const Matrix x = normal_rows(8000, 1, 0, 1, 21);
  auto cfg = quick(Objective::nll, 10);
  cfg.batch = 256;
  const auto res = train(FlowModel::init(FlowConfig{.dim = 1, .blocks = 4}, 2), x, Matrix(0, 1), cfg);
  const auto pbar = positive_difference(GaussianSpec::isotropic({0.0}, 1.0),
                                        {{1.0, GaussianSpec::isotropic({1.0}, 2.0)}}, make_grid_1d(-8, 8, 4001));
  const double peak = std::log(*std::max_element(pbar.values.begin(), pbar.values.end()));
  const auto e = select_epsilon(res.model, normal_rows(2000, 1, 0, 1, 22), 0.1, 0.0);
  CHECK(e.epsilon < peak);
  CHECK(e.epsilon == doctest::Approx(-0.91893853320467274 - 0.5 * 1.6448536 * 1.6448536).epsilon(0.05));
}

TEST_CASE("early stopping restores the best epoch") {
  const Matrix x = normal_rows(400, 2, 0, 1, 1);
  auto cfg = quick(Objective::nll, 200);
  cfg.lr = 3e-2;
  cfg.val_fraction = 0.25;
  cfg.patience = 3;
  const auto init = FlowModel::init(tiny(2), 7);
  const auto res = train(init, x, Matrix(0, 2), cfg);
  REQUIRE(res.history.stopped_early);
  CHECK(res.history.best_epoch + cfg.patience == res.history.epochs());
  const double best = *std::min_element(res.history.val_nll.begin(), res.history.val_nll.end());
  CHECK(res.history.val_nll[res.history.best_epoch - 1] == best);
  // Replaying exactly up to the best epoch yields the same parameters.
  cfg.max_epochs = res.history.best_epoch;
  cfg.patience = 1000;
  CHECK(train(init, x, Matrix(0, 2), cfg).model.params().flat_values() == res.model.params().flat_values());
}

TEST_CASE("cf_ft runs the NLL phase then finetunes") {
  const Matrix x = normal_rows(300, 2, 0, 1, 1), y = normal_rows(300, 2, 0, 2, 2);
  auto cfg = quick(Objective::cf_ft, 4);
  cfg.finetune_epochs = 2;
  cfg.clamp_tau = 30.0;
  const auto init = FlowModel::init(tiny(2), 8);
  const auto ft = train(init, x, y, cfg);
  CHECK(ft.history.epochs() == 6);
  CHECK(ft.history.best_epoch == 6);
  cfg.objective = Objective::nll;
  const auto plain = train(init, x, y, cfg);
  for (std::size_t e = 0; e < 4; ++e) CHECK(ft.history.train_loss[e] == plain.history.train_loss[e]);
  CHECK_FALSE(ft.model.params().flat_values() == plain.model.params().flat_values());
  // Finetuning starts from fresh optimizer moments.
  CHECK(ft.model.params().step() == 2 * 5);
}

TEST_CASE("train argument checks") {
  const auto m = FlowModel::init(tiny(2), 1);
  const Matrix x = normal_rows(10, 2, 0, 1, 1);
  CHECK_THROWS_AS(train(m, normal_rows(10, 3, 0, 1, 1), Matrix(0, 3), quick(Objective::nll, 1)), DimensionError);
  CHECK_THROWS_AS(train(m, x, normal_rows(10, 3, 0, 1, 1), quick(Objective::nll, 1)), DimensionError);
  CHECK_THROWS_AS(train(m, x, Matrix(0, 2), quick(Objective::contrastive, 1)), DegenerateInputError);
  CHECK_THROWS_AS(train(m, Matrix(0, 2), Matrix(0, 2), quick(Objective::nll, 1)), DegenerateInputError);
  auto bad = quick(Objective::nll, 1);
  bad.batch = 0;
  CHECK_THROWS_AS(train(m, x, Matrix(0, 2), bad), ConfigError);
  bad = quick(Objective::cf_ft, 1);
  bad.finetune_epochs = 0;
  CHECK_THROWS_AS(train(m, x, x, bad), ConfigError);
  bad = quick(Objective::nll, 1);
  bad.clamp_tau = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train(m, x, Matrix(0, 2), bad), ConfigError);
  CHECK_THROWS_AS(parse_objective("sgd"), ConfigError);
  CHECK(parse_objective(objective_name(Objective::cf_ft)) == Objective::cf_ft);
}

TEST_CASE("divergence surfaces with the history so far") {
  FlowModel m = FlowModel::init(tiny(2), 1);
  auto cfg = quick(Objective::nll, 3);
  const Matrix x = normal_rows(64, 2, 0, 1, 1);
  Matrix bad = x;
  bad(5, 1) = 1e300;
  try {
    train(m, bad, Matrix(0, 2), cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(e.history.epochs() == 0);
  }
}

TEST_CASE("history JSON layout") {
  TrainHistory h;
  h.train_loss = {1.5, 1.25};
  h.proxy_auroc = {std::numeric_limits<double>::quiet_NaN(), 0.75};
  h.val_nll = {1.0, 0.9};
  h.best_epoch = 2;
  const auto j = nlohmann::json::parse(to_json(h));
  CHECK(j["epoch"] == nlohmann::json::array({1, 2}));
  CHECK(j["proxy_auroc"][0].is_null());
  CHECK(j["proxy_auroc"][1] == 0.75);
  CHECK(j["best_epoch"] == 2);
  CHECK(j["stopped_early"] == false);
  const std::string s = to_json(h);
  CHECK(s.find("\"epoch\"") < s.find("\"train_loss\""));
  CHECK(s.find("\"proxy_auroc\"") < s.find("\"best_epoch\""));
}
