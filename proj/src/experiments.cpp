#include "cflow/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "cflow/error.hpp"
#include "cflow/feature_io.hpp"
#include "cflow/rng.hpp"
#include "json.hpp"

namespace cflow {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const auto path = (fs::path(dir) / name).string();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

void put_json(const std::string& dir, const std::string& name, const nlohmann::ordered_json& j) {
  auto os = open_out(dir, name);
  os << j.dump(2) << '\n';
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = standard_normal(rng);
      sq += x * x;
    }
  } while (sq < 1e-12);
  for (double& x : v) x /= std::sqrt(sq);
  return v;
}

// Gaussian blob around `dir`, pushed onto the sphere with ingestion noise.
Matrix cluster_samples(const std::vector<double>& dir, double spread, std::size_t n, double noise, Rng& rng) {
  FeatureSet s;
  s.data = Matrix(n, dir.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dir.size(); ++j) s.data(i, j) = dir[j] + spread * standard_normal(rng);
  return hypersphere_normalize(s, noise, rng()).data;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------- toy 1-D

Toy1dResult run_toy1d(const Toy1dConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto p = GaussianSpec::isotropic({0.0}, 1.0);
  const auto q = GaussianSpec::isotropic({1.0}, 2.0);
  const Matrix x = gen_gaussian(p, cfg.n_inlier, cfg.seed * 2 + 1).data;
  const Matrix y = gen_gaussian(q, cfg.n_contrastive, cfg.seed * 2 + 2).data;
  FlowConfig fc = cfg.flow;
  fc.dim = 1;
  TrainConfig tc = cfg.train;
  tc.clamp_tau = -cfg.epsilon;
  tc.seed = cfg.seed;
  auto res = train(FlowModel::init(fc, cfg.seed), x, y, tc);

  Toy1dResult r;
  const Grid g = make_grid_1d(cfg.grid_lo, cfg.grid_hi, cfg.grid_n);
  r.oracle = positive_difference(p, {{1.0, q}}, g);
  r.learned = model_density_on_grid(res.model, g);
  r.tv = tv_distance(r.learned, r.oracle);
  r.tv_to_p = tv_distance(r.learned, gaussian_on_grid(p, g));
  r.oracle_integral = trapezoid_integral(r.oracle);
  r.history = std::move(res.history);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void write_toy1d(const Toy1dResult& r, const std::string& dir) {
  {
    auto os = open_out(dir, "learned_density.csv");
    write_grid_csv(os, r.learned);
  }
  {
    auto os = open_out(dir, "oracle_density.csv");
    write_grid_csv(os, r.oracle);
  }
  nlohmann::ordered_json j;
  j["tv"] = r.tv;
  j["tv_to_inlier"] = r.tv_to_p;
  j["oracle_integral"] = r.oracle_integral;
  put_json(dir, "tv.json", j);
  auto os = open_out(dir, "history.json");
  os << to_json(r.history) << '\n';
}

// ---------------------------------------------------------------- clamp sweep

std::vector<ClampSweepRow> run_clamp_sweep(const ClampSweepConfig& cfg) {
  if (cfg.epsilons.empty()) throw ConfigError("clamp sweep needs at least one epsilon");
  std::vector<ClampSweepRow> rows;
  for (double eps : cfg.epsilons) {
    Toy1dConfig c = cfg.base;
    c.epsilon = eps;
    auto r = run_toy1d(c);
    rows.push_back({eps, std::move(r.learned), r.tv, r.tv_to_p});
  }
  return rows;
}

void write_clamp_sweep(const std::vector<ClampSweepRow>& rows, const std::string& dir) {
  auto table = open_out(dir, "clamp_sweep.csv");
  table << "epsilon,tv_to_pbar,tv_to_p\n";
  char buf[128];
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto os = open_out(dir, "density_eps_" + std::to_string(k) + ".csv");
    write_grid_csv(os, rows[k].learned);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", rows[k].epsilon, rows[k].tv_to_pbar, rows[k].tv_to_p);
    table << buf;
  }
}

// ---------------------------------------------------------------- toy 2-D

Toy2dResult run_toy2d(const Toy2dConfig& cfg) {
  const auto p = GaussianSpec::isotropic({1.0, 1.0}, 1.0);
  const auto q = GaussianSpec::isotropic({0.0, 0.0}, 1.0);
  const Matrix x = gen_gaussian(p, cfg.n_inlier, cfg.seed * 3 + 1).data;
  const Matrix y = gen_gaussian(q, cfg.n_contrastive, cfg.seed * 3 + 2).data;
  const Matrix x_eval = gen_gaussian(p, cfg.n_eval, cfg.seed * 3 + 3).data;

  MethodConfig mc{cfg.flow, cfg.train};
  mc.train.clamp_tau = -cfg.epsilon;
  mc.train.seed = cfg.seed;
  const FittedMethod cf = fit_method(Method::cf, x, y, mc);
  const FittedMethod ratio = fit_method(Method::flow_ratio, x, y, mc);

  Toy2dResult r;
  const Grid g = make_grid_2d(cfg.grid_lo, cfg.grid_hi, cfg.grid_n);
  const Matrix pts = g.points();
  r.cf_grid = {g, cf.score(pts)};
  r.ratio_grid = {g, ratio.score(pts)};
  for (double& v : r.cf_grid.values) v = std::exp(-v);
  for (double& v : r.ratio_grid.values) v = std::exp(-v);

  Matrix probe(2, 2);
  probe(0, 0) = cfg.corner[0];
  probe(0, 1) = cfg.corner[1];
  probe(1, 0) = 1.0;
  probe(1, 1) = 1.0;
  const auto cf_probe = cf.score(probe), ratio_probe = ratio.score(probe);
  r.cf_corner = std::exp(-cf_probe[0]);
  r.cf_center = std::exp(-cf_probe[1]);
  r.ratio_corner = std::exp(-ratio_probe[0]);
  r.ratio_center = std::exp(-ratio_probe[1]);
  auto cf_in = cf.score(x_eval), ratio_in = ratio.score(x_eval);
  for (double& v : cf_in) v = std::exp(-v);
  for (double& v : ratio_in) v = std::exp(-v);
  r.cf_inlier_p01 = quantile_of(cf_in, 0.01);
  r.ratio_inlier_p01 = quantile_of(ratio_in, 0.01);

  const std::size_t k = std::min({cfg.n_samples_out, x.rows(), y.rows()});
  r.samples = Matrix(2 * k, 2);
  for (std::size_t i = 0; i < k; ++i) {
    r.samples(i, 0) = x(i, 0);
    r.samples(i, 1) = x(i, 1);
    r.samples(k + i, 0) = y(i, 0);
    r.samples(k + i, 1) = y(i, 1);
  }
  return r;
}

void write_toy2d(const Toy2dResult& r, const std::string& dir) {
  {
    auto os = open_out(dir, "cf_grid.csv");
    write_grid_csv(os, r.cf_grid);
  }
  {
    auto os = open_out(dir, "ratio_grid.csv");
    write_grid_csv(os, r.ratio_grid);
  }
  {
    auto os = open_out(dir, "samples.csv");
    os << "x,y,label\n";
    const std::size_t k = r.samples.rows() / 2;
    char buf[96];
    for (std::size_t i = 0; i < r.samples.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", r.samples(i, 0), r.samples(i, 1), i < k ? 0 : 2);
      os << buf;
    }
  }
  nlohmann::ordered_json j;
  j["cf"] = {{"corner", r.cf_corner}, {"center", r.cf_center}, {"inlier_p01", r.cf_inlier_p01}};
  j["ratio"] = {{"corner", r.ratio_corner}, {"center", r.ratio_center}, {"inlier_p01", r.ratio_inlier_p01}};
  put_json(dir, "corner.json", j);
}

// ---------------------------------------------------------------- clusters

ClusterWorld make_cluster_world(const ClusterConfig& cfg) {
  if (cfg.dim < 2) throw ConfigError("cluster world needs dim >= 2");
  if (!(cfg.hard_cos > -1.0 && cfg.hard_cos < 1.0)) throw ConfigError("hard_cos must lie in (-1, 1)");
  if (cfg.n_train == 0 || cfg.n_test == 0 || cfg.n_broad == 0) throw ConfigError("cluster sizes must be >= 1");
  Rng rng = make_rng(cfg.seed, 0);
  const auto c0 = unit_vector(cfg.dim, rng);
  // Hard direction: rotate c0 towards a random orthogonal vector.
  auto u = unit_vector(cfg.dim, rng);
  double dot = 0;
  for (std::size_t j = 0; j < cfg.dim; ++j) dot += u[j] * c0[j];
  double sq = 0;
  for (std::size_t j = 0; j < cfg.dim; ++j) {
    u[j] -= dot * c0[j];
    sq += u[j] * u[j];
  }
  std::vector<double> hard(cfg.dim);
  const double sin_a = std::sqrt(1 - cfg.hard_cos * cfg.hard_cos);
  for (std::size_t j = 0; j < cfg.dim; ++j) hard[j] = cfg.hard_cos * c0[j] + sin_a * u[j] / std::sqrt(sq);

  ClusterWorld w;
  w.inlier_train = cluster_samples(c0, cfg.spread, cfg.n_train, cfg.noise, rng);
  w.inlier_pool = cluster_samples(c0, cfg.spread, cfg.n_train, cfg.noise, rng);
  w.inlier_test = cluster_samples(c0, cfg.spread, cfg.n_test, cfg.noise, rng);
  w.hard_train = cluster_samples(hard, cfg.spread, cfg.n_train, cfg.noise, rng);
  w.hard_test = cluster_samples(hard, cfg.spread, cfg.n_test, cfg.noise, rng);
  std::vector<Matrix> rest;
  const std::size_t per = std::max<std::size_t>(1, cfg.n_test / std::max<std::size_t>(1, cfg.n_rest_clusters));
  for (std::size_t k = 0; k < cfg.n_rest_clusters; ++k) {
    rest.push_back(cluster_samples(unit_vector(cfg.dim, rng), cfg.spread, per, cfg.noise, rng));
  }
  w.rest_test = rest.empty() ? Matrix(0, cfg.dim) : rest[0];
  for (std::size_t k = 1; k < rest.size(); ++k) w.rest_test = vstack(w.rest_test, rest[k]);
  FeatureSet broad = gen_gaussian(GaussianSpec::isotropic(std::vector<double>(cfg.dim, 0.0), 1.0), cfg.n_broad, rng());
  w.broad = hypersphere_normalize(broad, cfg.noise, rng()).data;
  return w;
}

std::string sweep_mode_name(SweepMode m) {
  switch (m) {
    case SweepMode::contaminated: return "contaminated";
    case SweepMode::narrow: return "narrow";
    case SweepMode::informed: return "informed";
  }
  return "?";
}

SweepMode parse_sweep_mode(std::string_view s) {
  for (SweepMode m : {SweepMode::contaminated, SweepMode::narrow, SweepMode::informed})
    if (s == sweep_mode_name(m)) return m;
  throw ConfigError("unknown sweep mode '" + std::string(s) + "'");
}

std::vector<MuSweepRow> run_mu_sweep(const MuSweepConfig& cfg) {
  if (cfg.reps == 0) throw ConfigError("repetitions must be >= 1");
  if (cfg.mus.empty() || cfg.methods.empty()) throw ConfigError("mu sweep needs mu values and methods");
  for (double mu : cfg.mus)
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("mu values must lie in [0, 1]");

  const std::size_t nm = cfg.methods.size(), nmu = cfg.mus.size();
  // [method][mu] -> per-repetition values
  std::vector<std::vector<std::vector<double>>> hard(nm, std::vector<std::vector<double>>(nmu));
  auto rest = hard;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    const std::uint64_t seed = cfg.seed + r;
    ClusterConfig cc = cfg.clusters;
    cc.seed = cfg.clusters.seed + seed;
    const ClusterWorld w = make_cluster_world(cc);
    FeatureSet broad{w.broad, {}, "broad"};
    const Matrix& other_rows = cfg.mode != SweepMode::contaminated ? w.hard_train
                               : cfg.contaminate_with_train  ? w.inlier_train
                                                             : w.inlier_pool;
    FeatureSet other{other_rows, {}, "other"};
    MethodConfig mc = cfg.method;
    mc.train.seed = seed;
    for (std::size_t a = 0; a < nm; ++a) {
      const Method m = cfg.methods[a];
      const bool uses_contrastive = method_needs_contrastive(m);
      for (std::size_t b = 0; b < nmu; ++b) {
        double ah, ar;
        if (!uses_contrastive && b > 0) {
          // Independent of the contrastive mixture: reuse the first fit.
          ah = hard[a][0].back();
          ar = rest[a][0].back();
        } else {
          const Matrix contr = mix_datasets({broad, other, cfg.mus[b], cfg.contrastive_total, seed}).set.data;
          const FittedMethod f = fit_method(m, w.inlier_train, contr, mc);
          const auto s_in = f.score(w.inlier_test);
          ah = auroc(s_in, f.score(w.hard_test));
          ar = auroc(s_in, f.score(w.rest_test));
        }
        hard[a][b].push_back(ah);
        rest[a][b].push_back(ar);
      }
    }
  }
  std::vector<MuSweepRow> rows;
  for (std::size_t a = 0; a < nm; ++a)
    for (std::size_t b = 0; b < nmu; ++b) {
      const double sh = sd_of(hard[a][b]), sr = sd_of(rest[a][b]);
      rows.push_back({cfg.methods[a], cfg.mus[b], mean_of(hard[a][b]), mean_of(rest[a][b]), std::max(sh, sr), sh, sr});
    }
  return rows;
}

void write_mu_sweep_csv(std::ostream& os, const std::vector<MuSweepRow>& rows) {
  os << "method,mu,auroc_hard,auroc_rest,sd\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", method_name(r.method).c_str(), r.mu,
                  100 * r.auroc_hard, 100 * r.auroc_rest, 100 * r.sd);
    os << buf;
  }
}

// ---------------------------------------------------------------- tabular

std::vector<ScoreReport> run_tabular(const TabularConfig& cfg) {
  Matrix train_in, test_in, test_out;
  if (cfg.csv_path.empty()) {
    Matrix cov(cfg.dim, cfg.dim);
    for (std::size_t i = 0; i < cfg.dim; ++i)
      for (std::size_t j = 0; j < cfg.dim; ++j)
        cov(i, j) = std::pow(cfg.correlation, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    const auto inl = GaussianSpec::full(std::vector<double>(cfg.dim, 0.0), cov);
    const auto outl = GaussianSpec::isotropic(std::vector<double>(cfg.dim, 0.0), 1.0);
    train_in = gen_gaussian(inl, cfg.n_train, cfg.seed * 3 + 1).data;
    test_in = gen_gaussian(inl, cfg.n_test, cfg.seed * 3 + 2).data;
    test_out = gen_gaussian(outl, cfg.n_test, cfg.seed * 3 + 3).data;
  } else {
    const FeatureSet all = load_features(cfg.csv_path);
    if (!all.has_labels()) throw ConfigError("tabular data needs a label column: " + cfg.csv_path);
    FeatureSet inl;
    inl.data = all.rows_with(Label::inlier);
    test_out = all.rows_with(Label::outlier);
    if (inl.size() < 2 || test_out.rows() == 0) throw DegenerateInputError("tabular data needs inliers and outliers");
    const Split sp = split(inl, {0.8, 0.0, 0.2}, cfg.seed);
    train_in = sp.train.data;
    test_in = sp.test.data;
    // Standardize with training-inlier statistics.
    for (std::size_t j = 0; j < train_in.cols(); ++j) {
      double m = 0, s = 0;
      for (std::size_t i = 0; i < train_in.rows(); ++i) m += train_in(i, j);
      m /= train_in.rows();
      for (std::size_t i = 0; i < train_in.rows(); ++i) s += std::pow(train_in(i, j) - m, 2);
      s = std::sqrt(s / train_in.rows());
      if (s == 0) s = 1;
      for (Matrix* mat : {&train_in, &test_in, &test_out})
        for (std::size_t i = 0; i < mat->rows(); ++i) (*mat)(i, j) = ((*mat)(i, j) - m) / s;
    }
  }
  const Matrix contr = permute_marginals(FeatureSet{train_in, {}, "tabular"}, cfg.seed + 7).data;
  MethodConfig mc = cfg.method;
  mc.train.seed = cfg.seed;
  std::vector<ScoreReport> out;
  for (Method m : cfg.methods) {
    const FittedMethod f = fit_method(m, train_in, contr, mc);
    out.push_back(make_score_report(method_name(m), f.score(test_in), f.score(test_out)));
  }
  return out;
}

}  // namespace cflow

// ---------------------------------------------------------------- one-vs-rest

namespace cflow {

std::vector<ClassData> make_sphere_classes(const OvrConfig& cfg) {
  if (cfg.dim < 2 || cfg.n_classes < 2) throw ConfigError("one-vs-rest needs dim >= 2 and >= 2 classes");
  Rng rng = make_rng(cfg.seed, 5);
  std::vector<ClassData> out;
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    const auto dir = unit_vector(cfg.dim, rng);
    Matrix tr = cluster_samples(dir, cfg.spread, cfg.n_train, cfg.noise, rng);
    Matrix te = cluster_samples(dir, cfg.spread, cfg.n_test, cfg.noise, rng);
    out.push_back({"class" + std::to_string(k), std::move(tr), std::move(te)});
  }
  return out;
}

double OvrReport::mean_auroc(std::size_t i) const {
  return mean_of(results.at(i).row_mean);
}

OvrReport run_one_vs_rest(const OvrConfig& cfg) {
  if (cfg.methods.empty()) throw ConfigError("one-vs-rest needs at least one method");
  const auto classes = make_sphere_classes(cfg);
  Rng rng = make_rng(cfg.seed, 6);
  FeatureSet broad = gen_gaussian(GaussianSpec::isotropic(std::vector<double>(cfg.dim, 0.0), 1.0),
                                  cfg.n_contrastive, rng());
  const Matrix contr = hypersphere_normalize(broad, cfg.noise, rng()).data;
  MethodConfig mc = cfg.method;
  mc.train.seed = cfg.seed;
  OvrReport r;
  r.methods = cfg.methods;
  for (Method m : cfg.methods) r.results.push_back(one_vs_rest(classes, contr, m, mc));
  for (std::size_t i = 1; i < cfg.methods.size(); ++i)
    r.comparisons.push_back({cfg.methods[0], cfg.methods[i],
                             wilcoxon_signed_rank(r.results[0].row_mean, r.results[i].row_mean)});
  return r;
}

void write_one_vs_rest(const OvrReport& r, const std::string& dir) {
  char buf[160];
  for (std::size_t i = 0; i < r.methods.size(); ++i) {
    auto os = open_out(dir, "ovr_" + method_name(r.methods[i]) + ".csv");
    os << "class,auroc\n";
    const auto& res = r.results[i];
    for (std::size_t k = 0; k < res.names.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%s,%.17g\n", res.names[k].c_str(), 100 * res.row_mean[k]);
      os << buf;
    }
  }
  nlohmann::ordered_json j;
  j["mean_auroc"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.methods.size(); ++i) j["mean_auroc"][method_name(r.methods[i])] = 100 * r.mean_auroc(i);
  j["comparisons"] = nlohmann::ordered_json::array();
  for (const auto& c : r.comparisons)
    j["comparisons"].push_back({{"a", method_name(c.a)},
                                {"b", method_name(c.b)},
                                {"w_plus", c.test.w_plus},
                                {"n", c.test.n},
                                {"p_value", c.test.p_value},
                                {"exact", c.test.exact}});
  put_json(dir, "wilcoxon.json", j);
}

}  // namespace cflow
