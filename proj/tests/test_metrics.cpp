#include <algorithm>
#include <cmath>
#include <sstream>

#include "cflow/error.hpp"
#include "cflow/metrics.hpp"
#include "cflow/rng.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cflow;

namespace {

// O(n*m) pairwise count, ties worth one half.
double pairwise_auroc(const std::vector<double>& in, const std::vector<double>& out) {
  double wins = 0.0;
  for (double o : out)
    for (double i : in) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(in.size()) * out.size());
}

std::vector<double> draws(std::size_t n, std::uint64_t seed, double shift, bool coarse) {
  Rng rng = make_rng(seed, 0);
  std::vector<double> v(n);
  for (double& x : v) {
    x = standard_normal(rng) + shift;
    if (coarse) x = std::round(4 * x) / 4;  // plenty of ties
  }
  return v;
}

}  // namespace

TEST_CASE("outlier score of the identity model") {
  const auto m = FlowModel::init(FlowConfig{.dim = 1, .blocks = 2, .hidden = 4}, 3);
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = std::sqrt(2 * std::log(2.0));  // density halves
  const auto s = outlier_score(m, x);
  CHECK(s[0] == doctest::Approx(0.91893853320467274).epsilon(1e-14));
  CHECK(s[1] - s[0] == doctest::Approx(std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("auroc fixtures") {
  CHECK(auroc(std::vector<double>{1, 3}, std::vector<double>{2, 4}) == 0.75);
  CHECK(auroc(std::vector<double>{1, 2}, std::vector<double>{5, 6}) == 1.0);
  CHECK(auroc(std::vector<double>{7, 7, 7}, std::vector<double>{7, 7}) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1}), DegenerateInputError);
  CHECK_THROWS_AS(auroc(std::vector<double>{1}, std::vector<double>{}), DegenerateInputError);
  CHECK_THROWS_AS(auroc(std::vector<double>{NAN}, std::vector<double>{1}), NumericError);
}

TEST_CASE("auroc equals the pairwise oracle on random sets") {
  for (std::size_t n : {1u, 7u, 100u, 1000u, 10000u}) {
    for (bool coarse : {false, true}) {
      const auto in = draws(n, n, 0.0, coarse);
      const auto out = draws(n / 2 + 1, n + 1, 0.7, coarse);
      const double a = auroc(in, out);
      CHECK(std::abs(a - pairwise_auroc(in, out)) < 1e-12);
      CHECK(std::abs(a + auroc(out, in) - 1.0) < 1e-12);
      const auto roc = roc_curve(in, out);
      CHECK(std::abs(roc.area - a) < 1e-12);
    }
  }
}

TEST_CASE("auroc is invariant under increasing maps") {
  const auto in = draws(300, 1, 0.0, true);
  const auto out = draws(200, 2, 0.5, true);
  auto map = [](std::vector<double> v) {
    for (double& x : v) x = std::exp(0.7 * x) + std::tanh(x);
    return v;
  };
  CHECK(auroc(map(in), map(out)) == auroc(in, out));
}

TEST_CASE("roc curve shape") {
  const auto sep = roc_curve(std::vector<double>{1, 2}, std::vector<double>{5, 6});
  CHECK(sep.points.front().fpr == 0.0);
  CHECK(sep.points.front().tpr == 0.0);
  CHECK(sep.points.back().fpr == 1.0);
  CHECK(sep.points.back().tpr == 1.0);
  CHECK(std::any_of(sep.points.begin(), sep.points.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
  CHECK(sep.area == 1.0);

  CHECK(roc_curve(std::vector<double>{0.0}, std::vector<double>{1.0}).points.size() == 3);

  const auto r = roc_curve(draws(500, 3, 0, true), draws(400, 4, 1, true));
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    CHECK(r.points[i].threshold < r.points[i - 1].threshold);
  }
}

TEST_CASE("histogram binning") {
  const std::vector<double> ten{0.0, 0.5, 0.99, 1.0, 1.5, 2.2, 2.9, 3.0, 3.7, 4.0};
  const auto h = histogram(ten, 0.0, 4.0, 4);
  // [0,1) [1,2) [2,3) [3,4]
  CHECK(h.counts == std::vector<std::size_t>{3, 2, 2, 3});
  CHECK(histogram(std::vector<double>{0.2, 0.3}, 0, 1, 5).counts == std::vector<std::size_t>{0, 2, 0, 0, 0});
  CHECK(histogram(std::vector<double>{}, 0, 1, 3).counts == std::vector<std::size_t>{0, 0, 0});
  const auto clamped = histogram(std::vector<double>{-5, 10, 0.5}, 0, 1, 2);
  CHECK(clamped.counts == std::vector<std::size_t>{1, 2});
  const auto many = draws(5000, 9, 0, false);
  const auto hm = histogram(many, -1, 1, 17);
  std::size_t total = 0;
  for (auto c : hm.counts) total += c;
  CHECK(total == many.size());
  CHECK_THROWS_AS(histogram(ten, 1.0, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(histogram(ten, 0.0, 1.0, 0), ConfigError);
}

TEST_CASE("score report exports") {
  const auto r = make_score_report("cf", std::vector<double>{1, 3}, std::vector<double>{2, 4}, 3);
  CHECK(r.auroc == 0.75);
  CHECK(r.scores.size() == 4);
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["auroc"] == 0.75);
  CHECK(j["n_inliers"] == 2);
  CHECK(j["histogram"]["edges"].size() == 4);
  CHECK(j["histogram"]["count_in"].get<std::vector<int>>() == std::vector<int>{1, 0, 1});
  CHECK(j["histogram"]["count_out"].get<std::vector<int>>() == std::vector<int>{0, 1, 1});
  CHECK(to_json(r).find("\"method\"") < to_json(r).find("\"auroc\""));

  std::ostringstream roc, hist;
  write_roc_csv(roc, r.roc);
  CHECK(roc.str().rfind("threshold,fpr,tpr\n", 0) == 0);
  write_histogram_csv(hist, r.hist_in, r.hist_out);
  CHECK(hist.str() == "edge,count_in,count_out\n1,1,0\n2,0,1\n3,1,1\n4,0,0\n");
}
