// cflow: experiment runner and train/score/eval pipeline.
//
// Exit codes: 0 ok, 1 numeric failure, 2 usage or config error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cflow/error.hpp"
#include "cflow/experiments.hpp"
#include "cflow/feature_io.hpp"
#include "cflow/flow_io.hpp"
#include "cflow/metrics.hpp"
#include "cflow/wilcoxon.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cflow;

namespace {

enum Exit { kOk = 0, kNumeric = 1, kUsage = 2, kIo = 3 };

// ------------------------------------------------------------ config file

// Reads keys from one JSON object, rejecting anything not consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where() + key + ": " + e.what());
    }
  }

  void methods(const char* key, std::vector<Method>& out) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = parse_method_list(s);
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_ + key + ".");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + path_ + it.key() + "'");
  }

 private:
  std::string where() const { return "config " + (path_.empty() ? std::string("root") : path_) + ": "; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_flow(Section& s, FlowConfig& f) {
  s.get("blocks", f.blocks);
  s.get("hidden", f.hidden);
  s.get("hidden_layers", f.hidden_layers);
  s.get("clamp", f.clamp);
  std::string act;
  s.get("activation", act);
  if (act == "relu") f.activation = Activation::relu;
  else if (act == "softplus") f.activation = Activation::softplus;
  else if (!act.empty()) throw ConfigError("activation must be relu or softplus");
  s.finish();
}

void read_train(Section& s, TrainConfig& t) {
  s.get("batch", t.batch);
  s.get("lr", t.lr);
  s.get("max_epochs", t.max_epochs);
  s.get("clamp_tau", t.clamp_tau);
  s.get("patience", t.patience);
  s.get("val_fraction", t.val_fraction);
  s.get("finetune_epochs", t.finetune_epochs);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("adam_eps", t.adam_eps);
  std::string obj;
  s.get("objective", obj);
  if (!obj.empty()) t.objective = parse_objective(obj);
  s.finish();
}

void read_model_parts(Section& s, FlowConfig& f, TrainConfig& t) {
  if (auto fs_ = s.sub("flow")) read_flow(*fs_, f);
  if (auto ts = s.sub("train")) read_train(*ts, t);
}

void read_clusters(Section& s, ClusterConfig& c) {
  s.get("dim", c.dim);
  s.get("n_rest_clusters", c.n_rest_clusters);
  s.get("spread", c.spread);
  s.get("hard_cos", c.hard_cos);
  s.get("n_train", c.n_train);
  s.get("n_test", c.n_test);
  s.get("n_broad", c.n_broad);
  s.get("noise", c.noise);
  s.finish();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  try {
    return json::parse(is, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

// ------------------------------------------------------------ shared flags

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string methods;
  std::optional<std::size_t> reps;
};

// Loaded config plus root keys every subcommand accepts; flags override them.
struct Run {
  explicit Run(const Common& c) : cfg(load_config(c.config)), root(cfg, ""), out(c.out) {
    root.get("seed", seed);
    if (c.seed) seed = *c.seed;
    std::string o;
    root.get("out", o);
    if (!o.empty() && c.out == "out") out = o;
  }
  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;

  json cfg;
  Section root;
  std::string out;
  std::uint64_t seed = 0;
};

void apply_methods(Section& root, const Common& c, std::vector<Method>& m) {
  root.methods("methods", m);
  if (!c.methods.empty()) m = parse_method_list(c.methods);
}

std::size_t apply_reps(Section& root, const Common& c, std::size_t def) {
  root.get("reps", def);
  if (c.reps) def = *c.reps;
  if (def == 0) throw ConfigError("repetitions must be >= 1");
  return def;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const auto path = (fs::path(dir) / name).string();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_report_files(const ScoreReport& r, const std::string& dir, const std::string& suffix) {
  open_out(dir, "report" + suffix + ".json") << to_json(r) << '\n';
  {
    auto os = open_out(dir, "roc" + suffix + ".csv");
    write_roc_csv(os, r.roc);
  }
  auto os = open_out(dir, "histogram" + suffix + ".csv");
  write_histogram_csv(os, r.hist_in, r.hist_out);
}

// ------------------------------------------------------------ experiments

void cmd_toy1d(const Common& c) {
  Run ctx(c);
  Section* root = &ctx.root;
  Toy1dConfig cfg;
  cfg.seed = ctx.seed;
  root->get("n_inlier", cfg.n_inlier);
  root->get("n_contrastive", cfg.n_contrastive);
  root->get("epsilon", cfg.epsilon);
  root->get("grid_lo", cfg.grid_lo);
  root->get("grid_hi", cfg.grid_hi);
  root->get("grid_n", cfg.grid_n);
  read_model_parts(*root, cfg.flow, cfg.train);
  root->finish();
  const auto r = run_toy1d(cfg);
  write_toy1d(r, ctx.out);
  std::printf("tv %.6f  tv_to_inlier %.6f  oracle_integral %.9f\n", r.tv, r.tv_to_p, r.oracle_integral);
}

void cmd_clamp_sweep(const Common& c) {
  Run ctx(c);
  Section* root = &ctx.root;
  ClampSweepConfig cfg;
  cfg.base.seed = ctx.seed;
  root->get("epsilons", cfg.epsilons);
  root->get("n_inlier", cfg.base.n_inlier);
  root->get("n_contrastive", cfg.base.n_contrastive);
  root->get("grid_n", cfg.base.grid_n);
  read_model_parts(*root, cfg.base.flow, cfg.base.train);
  root->finish();
  const auto rows = run_clamp_sweep(cfg);
  write_clamp_sweep(rows, ctx.out);
  for (const auto& r : rows)
    std::printf("epsilon %g  tv_to_pbar %.6f  tv_to_p %.6f\n", r.epsilon, r.tv_to_pbar, r.tv_to_p);
}

void cmd_toy2d(const Common& c) {
  Run ctx(c);
  Section* root = &ctx.root;
  Toy2dConfig cfg;
  cfg.seed = ctx.seed;
  root->get("n_inlier", cfg.n_inlier);
  root->get("n_contrastive", cfg.n_contrastive);
  root->get("n_eval", cfg.n_eval);
  root->get("epsilon", cfg.epsilon);
  root->get("grid_n", cfg.grid_n);
  root->get("n_samples_out", cfg.n_samples_out);
  read_model_parts(*root, cfg.flow, cfg.train);
  root->finish();
  const auto r = run_toy2d(cfg);
  write_toy2d(r, ctx.out);
  std::printf("cf corner %.3g center %.3g inlier_p01 %.3g | ratio corner %.3g\n", r.cf_corner, r.cf_center,
              r.cf_inlier_p01, r.ratio_corner);
}

void cmd_mu_sweep(const Common& c, SweepMode mode) {
  Run ctx(c);
  Section* root = &ctx.root;
  MuSweepConfig cfg;
  cfg.mode = mode;
  cfg.seed = ctx.seed;
  if (mode == SweepMode::informed) cfg.mus = {0.0, 0.5, 1.0};
  std::string m;
  root->get("mode", m);
  if (!m.empty()) cfg.mode = parse_sweep_mode(m);
  root->get("mus", cfg.mus);
  root->get("contrastive_total", cfg.contrastive_total);
  root->get("contaminate_with_train", cfg.contaminate_with_train);
  if (auto cs = root->sub("clusters")) read_clusters(*cs, cfg.clusters);
  apply_methods(*root, c, cfg.methods);
  cfg.reps = apply_reps(*root, c, cfg.reps);
  read_model_parts(*root, cfg.method.flow, cfg.method.train);
  root->finish();
  const auto rows = run_mu_sweep(cfg);
  auto os = open_out(ctx.out, sweep_mode_name(cfg.mode) == "informed" ? "informed.csv" : "mu_sweep.csv");
  write_mu_sweep_csv(os, rows);
  write_mu_sweep_csv(std::cout, rows);
}

void cmd_tabular(const Common& c) {
  Run ctx(c);
  Section* root = &ctx.root;
  TabularConfig cfg;
  cfg.seed = ctx.seed;
  root->get("csv", cfg.csv_path);
  root->get("dim", cfg.dim);
  root->get("correlation", cfg.correlation);
  root->get("n_train", cfg.n_train);
  root->get("n_test", cfg.n_test);
  apply_methods(*root, c, cfg.methods);
  read_model_parts(*root, cfg.method.flow, cfg.method.train);
  root->finish();
  if (!cfg.csv_path.empty() && !fs::exists(cfg.csv_path)) throw IoError("no such file: " + cfg.csv_path);
  const auto reports = run_tabular(cfg);
  auto os = open_out(ctx.out, "tabular.csv");
  os << "method,auroc\n";
  for (const auto& r : reports) {
    os << r.method << ',' << fmt(100 * r.auroc) << '\n';
    write_report_files(r, ctx.out, "_" + r.method);
    std::printf("%s %.2f\n", r.method.c_str(), 100 * r.auroc);
  }
}

std::vector<double> read_class_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("class,auroc", 0) != 0) throw IoError(path + ": expected header class,auroc");
  std::vector<double> v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path + ": malformed row '" + line + "'");
    try {
      v.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError(path + ": cannot parse '" + line + "'");
    }
  }
  return v;
}

void cmd_report(const Common& c, const std::vector<std::string>& tables) {
  Run ctx(c);
  Section* root = &ctx.root;
  if (!tables.empty()) {
    // Pair two per-class tables produced earlier.
    if (tables.size() != 2) throw ConfigError("--tables takes exactly two files");
    root->finish();
    const auto a = read_class_table(tables[0]), b = read_class_table(tables[1]);
    const auto w = wilcoxon_signed_rank(a, b);
    json j{{"a", tables[0]}, {"b", tables[1]}, {"w_plus", w.w_plus}, {"n", w.n}, {"p_value", w.p_value},
           {"exact", w.exact}};
    open_out(ctx.out, "wilcoxon.json") << j.dump(2) << '\n';
    std::printf("w_plus %g  n %zu  p %.6g\n", w.w_plus, w.n, w.p_value);
    return;
  }
  OvrConfig cfg;
  cfg.seed = ctx.seed;
  root->get("dim", cfg.dim);
  root->get("n_classes", cfg.n_classes);
  root->get("spread", cfg.spread);
  root->get("n_train", cfg.n_train);
  root->get("n_test", cfg.n_test);
  root->get("n_contrastive", cfg.n_contrastive);
  root->get("noise", cfg.noise);
  apply_methods(*root, c, cfg.methods);
  read_model_parts(*root, cfg.method.flow, cfg.method.train);
  root->finish();
  const auto r = run_one_vs_rest(cfg);
  write_one_vs_rest(r, ctx.out);
  for (std::size_t i = 0; i < r.methods.size(); ++i)
    std::printf("%s %.2f\n", method_name(r.methods[i]).c_str(), 100 * r.mean_auroc(i));
}

// ------------------------------------------------------------ pipeline

FeatureSet load_existing(const std::string& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path);
  return load_features(path);
}

void cmd_train(const Common& c, const std::string& input, const std::string& contrastive) {
  Run ctx(c);
  Section* root = &ctx.root;
  FlowConfig flow{.blocks = 8, .hidden = 64};
  TrainConfig train;
  std::vector<Method> methods{Method::cf};
  apply_methods(*root, c, methods);
  read_model_parts(*root, flow, train);
  root->finish();
  if (methods.size() != 1) throw ConfigError("train takes exactly one method");
  const Method m = methods[0];
  if (m != Method::cf && m != Method::cf_ft && m != Method::nll_flow)
    throw ConfigError("train writes a single flow: use cf, cf_ft or nll_flow");

  const FeatureSet in = load_existing(input);
  Matrix inliers = in.data, contr(0, in.dim());
  if (in.has_labels()) {
    // Labelled input: inlier rows train, contrastive rows push down.
    inliers = in.rows_with(Label::inlier);
    contr = in.rows_with(Label::contrastive);
  }
  if (!contrastive.empty()) {
    const FeatureSet cs = load_existing(contrastive);
    if (cs.dim() != in.dim())
      throw DimensionError("contrastive file has dim " + std::to_string(cs.dim()) + ", inliers have " +
                           std::to_string(in.dim()));
    contr = cs.data;
  }
  flow.dim = in.dim();
  train.seed = ctx.seed;
  const FittedMethod f = fit_method(m, inliers, contr, MethodConfig{flow, train});
  fs::create_directories(ctx.out);
  save_model(*f.flow, (fs::path(ctx.out) / "model.cflw").string());
  open_out(ctx.out, "history.json") << to_json(f.history) << '\n';
  std::printf("trained %s on %zu rows (dim %zu), best epoch %zu\n", method_name(m).c_str(), inliers.rows(),
              in.dim(), f.history.best_epoch);
}

void cmd_score(const Common& c, const std::string& model_path, const std::string& input) {
  Run ctx(c);
  Section* root = &ctx.root;
  root->finish();
  if (!fs::exists(model_path)) throw IoError("no such file: " + model_path);
  const FlowModel model = load_model(model_path);
  const FeatureSet x = load_existing(input);
  if (x.dim() != model.dim())
    throw DimensionError("feature dim " + std::to_string(x.dim()) + " does not match model dim " +
                         std::to_string(model.dim()));
  const auto s = outlier_score(model, x.data);
  auto os = open_out(ctx.out, "scores.csv");
  os << "score,label\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << fmt(s[i]) << ',';
    if (x.has_labels()) os << static_cast<int>(x.labels[i]);
    os << '\n';
  }
}

struct ScoreFile {
  std::vector<double> in, out;
};

ScoreFile read_scores(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("score,label", 0) != 0)
    throw IoError(path + ": expected header score,label");
  ScoreFile f;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma + 1 >= line.size())
      throw ConfigError(path + ":" + std::to_string(n) + ": every row needs a label");
    double s;
    int lab;
    try {
      s = std::stod(line.substr(0, comma));
      lab = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(n) + ": cannot parse '" + line + "'");
    }
    if (lab == 0) f.in.push_back(s);
    else if (lab == 1) f.out.push_back(s);
    else if (lab != 2) throw IoError(path + ":" + std::to_string(n) + ": label must be 0, 1 or 2");
  }
  return f;
}

void cmd_eval(const Common& c, const std::vector<std::string>& scores, const std::vector<std::string>& against,
              std::size_t bins) {
  Run ctx(c);
  Section* root = &ctx.root;
  root->get("bins", bins);
  root->finish();
  if (!against.empty() && against.size() != scores.size())
    throw ConfigError("--against needs as many files as --scores");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto f = read_scores(scores[i]);
    const auto r = make_score_report(fs::path(scores[i]).stem().string(), f.in, f.out, bins);
    write_report_files(r, ctx.out, scores.size() == 1 ? "" : "_" + std::to_string(i));
    a.push_back(r.auroc);
    std::printf("%s auroc %.4f\n", scores[i].c_str(), 100 * r.auroc);
  }
  if (scores.size() > 1) {
    auto os = open_out(ctx.out, "summary.csv");
    os << "file,auroc\n";
    for (std::size_t i = 0; i < scores.size(); ++i) os << scores[i] << ',' << fmt(100 * a[i]) << '\n';
  }
  if (!against.empty()) {
    // One file per class: pair the per-file AUROCs.
    for (const auto& p : against) {
      const auto f = read_scores(p);
      b.push_back(auroc(f.in, f.out));
    }
    const auto w = wilcoxon_signed_rank(a, b);
    json j{{"w_plus", w.w_plus}, {"n", w.n}, {"p_value", w.p_value}, {"exact", w.exact}};
    open_out(ctx.out, "wilcoxon.json") << j.dump(2) << '\n';
    std::printf("wilcoxon w_plus %g  n %zu  p %.6g\n", w.w_plus, w.n, w.p_value);
  }
}

void add_common(CLI::App* sub, Common& c, bool with_methods, bool with_reps) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "root seed");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  if (with_methods) sub->add_option("--method", c.methods, "comma-separated methods");
  if (with_reps) sub->add_option("--reps", c.reps, "repetitions");
}

int run(int argc, char** argv) {
  CLI::App app{"Contrastive normalizing flows: experiments and scoring pipeline"};
  app.require_subcommand(1);
  Common c;
  std::string input, contrastive, model;
  std::vector<std::string> scores, against, tables;
  std::size_t bins = 50;

  auto* toy1d = app.add_subcommand("toy1d", "1-D toy: learned vs positive-difference density");
  add_common(toy1d, c, false, false);
  auto* toy2d = app.add_subcommand("toy2d", "2-D toy: CF and ratio score grids");
  add_common(toy2d, c, false, false);
  auto* clamp = app.add_subcommand("clamp-sweep", "1-D toy retrained per clamp threshold");
  add_common(clamp, c, false, false);
  auto* mu = app.add_subcommand("mu-sweep", "contrastive mixture sweep on synthetic clusters");
  add_common(mu, c, true, true);
  auto* informed = app.add_subcommand("informed", "mixture sweep with a known outlier class");
  add_common(informed, c, true, true);
  auto* tab = app.add_subcommand("tabular", "tabular data with marginal-permutation contrastive set");
  add_common(tab, c, true, false);
  auto* rep = app.add_subcommand("report", "one-vs-rest table and per-class Wilcoxon test");
  add_common(rep, c, true, false);
  rep->add_option("--tables", tables, "pair two class,auroc tables instead");

  auto* tr = app.add_subcommand("train", "train one flow on a feature file");
  add_common(tr, c, true, false);
  tr->add_option("--input", input, "inlier features (.csv or binary)")->required();
  tr->add_option("--contrastive", contrastive, "contrastive features");
  auto* sc = app.add_subcommand("score", "write outlier scores for a feature file");
  add_common(sc, c, false, false);
  sc->add_option("--model", model, "model file")->required();
  sc->add_option("--input", input, "features to score")->required();
  auto* ev = app.add_subcommand("eval", "AUROC, ROC and histograms from score files");
  add_common(ev, c, false, false);
  ev->add_option("--scores", scores, "score,label CSV files")->required();
  ev->add_option("--against", against, "competing score files, paired by position");
  ev->add_option("--bins", bins, "histogram bins")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*toy1d) cmd_toy1d(c);
    else if (*toy2d) cmd_toy2d(c);
    else if (*clamp) cmd_clamp_sweep(c);
    else if (*mu) cmd_mu_sweep(c, SweepMode::contaminated);
    else if (*informed) cmd_mu_sweep(c, SweepMode::informed);
    else if (*tab) cmd_tabular(c);
    else if (*rep) cmd_report(c, tables);
    else if (*tr) cmd_train(c, input, contrastive);
    else if (*sc) cmd_score(c, model, input);
    else if (*ev) cmd_eval(c, scores, against, bins);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n' << to_json(e.history) << '\n';
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
