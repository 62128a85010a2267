#include "cflow/training.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "cflow/datasets.hpp"
#include "cflow/metrics.hpp"
#include "cflow/rng.hpp"
#include "json.hpp"

namespace cflow {
namespace {

// RNG streams of a training run.
constexpr std::uint64_t kSplitInlier = 1, kSplitContrastive = 2, kShuffleInlier = 3, kShuffleContrastive = 4;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s * (1.0 / static_cast<double>(v.size()));
}

struct Held {
  Matrix train;
  Matrix val;
};

Held hold_out(const Matrix& m, double fraction, std::uint64_t seed, std::uint64_t stream) {
  if (fraction == 0.0 || m.rows() == 0) return {m, Matrix(0, m.cols())};
  Rng rng = make_rng(seed, stream);
  const auto perm = shuffled_indices(m.rows(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m.rows())));
  n_val = std::min(n_val, m.rows() - 1);
  const std::size_t n_train = m.rows() - n_val;
  return {m.gather_rows(std::span<const std::size_t>(perm.data(), n_train)),
          m.gather_rows(std::span<const std::size_t>(perm.data() + n_train, n_val))};
}

// Endless reshuffled pass over the rows of a set.
class Cycler {
 public:
  Cycler(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)) {}
  void reshuffle() {
    order_ = shuffled_indices(n_, rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> take(std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == order_.size()) reshuffle();
      const std::size_t m = std::min(k - out.size(), order_.size() - pos_);
      out.insert(out.end(), order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + m));
      pos_ += m;
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// One training phase over fixed data splits.
struct Phase {
  Objective objective;
  std::size_t epochs;
  bool select;  // early stopping and best-epoch restore
};

class Trainer {
 public:
  Trainer(FlowModel& model, const Matrix& inliers, const Matrix& contrastive, const TrainConfig& cfg)
      : model_(model), cfg_(cfg) {
    Held in = hold_out(inliers, cfg.val_fraction, cfg.seed, kSplitInlier);
    in_train_ = std::move(in.train);
    in_val_ = std::move(in.val);
    if (contrastive.rows() > 0) {
      Held c = hold_out(contrastive, cfg.val_fraction, cfg.seed, kSplitContrastive);
      c_train_ = std::move(c.train);
      c_val_ = std::move(c.val);
    }
    adam_ = AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
  }

  void run(const Phase& ph, TrainHistory& h) {
    // Fresh streams per phase, so the NLL part of cf_ft equals a plain NLL run.
    Rng in_rng = make_rng(cfg_.seed, kShuffleInlier + 16 * phase_);
    Cycler contr(c_train_.rows(), make_rng(cfg_.seed, kShuffleContrastive + 16 * phase_));
    ++phase_;
    const std::size_t offset = h.epochs();
    const std::size_t batch = std::min(cfg_.batch, in_train_.rows());
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_params;
    std::size_t since_best = 0;

    for (std::size_t e = 0; e < ph.epochs; ++e) {
      const auto order = shuffled_indices(in_train_.rows(), in_rng);
      if (ph.objective == Objective::contrastive) contr.reshuffle();
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t len = std::min(batch, order.size() - start);
        const Matrix xb = in_train_.gather_rows(std::span<const std::size_t>(order.data() + start, len));
        double loss;
        try {
          if (ph.objective == Objective::contrastive) {
            const auto idx = contr.take(len);
            loss = contrastive_objective(model_, xb, c_train_.gather_rows(idx), cfg_.clamp_tau);
          } else {
            loss = nll_objective(model_, xb);
          }
          adam_step(model_.params(), adam_);
        } catch (const NumericError& err) {
          throw TrainingDiverged("training diverged in epoch " + std::to_string(offset + e + 1) + ": " + err.what(), h);
        }
        loss_sum += loss;
        ++batches;
      }
      h.train_loss.push_back(loss_sum / static_cast<double>(batches));
      const double auc = c_val_.rows() > 0 && in_val_.rows() > 0 ? proxy_auroc(model_, in_val_, c_val_)
                                                                   : std::numeric_limits<double>::quiet_NaN();
      double vnll = std::numeric_limits<double>::quiet_NaN();
      if (in_val_.rows() > 0) vnll = -mean_of(log_prob(model_, in_val_));
      h.proxy_auroc.push_back(auc);
      h.val_nll.push_back(vnll);

      if (!ph.select || in_val_.rows() == 0) {
        h.best_epoch = h.epochs();
        continue;
      }
      const double metric = std::isnan(auc) ? -vnll : auc;
      if (metric > best) {
        best = metric;
        best_params = model_.params().flat_values();
        h.best_epoch = h.epochs();
        since_best = 0;
      } else if (++since_best >= cfg_.patience) {
        h.stopped_early = true;
        break;
      }
    }
    if (!best_params.empty()) model_.params().assign_flat_values(best_params);
  }

  void reset_optimizer() { model_.params().reset_optimizer(); }
  bool has_contrastive() const { return c_train_.rows() > 0; }

 private:
  FlowModel& model_;
  const TrainConfig& cfg_;
  AdamConfig adam_;
  Matrix in_train_, in_val_, c_train_, c_val_;
  std::uint64_t phase_ = 0;
};

}  // namespace

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::nll: return "nll";
    case Objective::contrastive: return "contrastive";
    case Objective::cf_ft: return "cf_ft";
  }
  return "?";
}

Objective parse_objective(std::string_view s) {
  if (s == "nll") return Objective::nll;
  if (s == "contrastive") return Objective::contrastive;
  if (s == "cf_ft") return Objective::cf_ft;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!std::isfinite(clamp_tau)) throw ConfigError("clamp threshold must be finite");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
  if (patience == 0) throw ConfigError("patience must be >= 1");
  if (objective == Objective::cf_ft && finetune_epochs == 0) throw ConfigError("cf_ft needs finetune epochs >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0)) throw ConfigError("invalid Adam settings");
}

std::string to_json(const TrainHistory& h) {
  nlohmann::ordered_json j;
  std::vector<std::size_t> epochs(h.epochs());
  std::iota(epochs.begin(), epochs.end(), std::size_t{1});
  j["epoch"] = epochs;
  j["train_loss"] = h.train_loss;
  auto auc = nlohmann::ordered_json::array();
  for (double v : h.proxy_auroc) auc.push_back(std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v));
  j["proxy_auroc"] = auc;
  j["best_epoch"] = h.best_epoch;
  j["stopped_early"] = h.stopped_early;
  return j.dump(2);
}

double nll_objective(FlowModel& model, const Matrix& batch) {
  if (batch.rows() == 0) throw ConfigError("nll_objective: empty batch");
  const double loss = log_prob_backward(model, batch);
  if (!std::isfinite(loss)) throw NumericError("nll_objective: non-finite loss");
  return loss;
}

double contrastive_objective(FlowModel& model, const Matrix& pos, const Matrix& neg, double tau) {
  if (pos.rows() == 0 || neg.rows() == 0) throw ConfigError("contrastive_objective: empty batch");
  if (pos.cols() != neg.cols()) throw DimensionError("contrastive_objective: batches differ in dimension");
  const double pos_loss = log_prob_backward(model, pos);

  const FlowRecord rec = forward_recorded(model, neg);
  const std::vector<double> nll = nll_from(rec);
  const double w = 1.0 / static_cast<double>(neg.rows());
  std::vector<double> weights(neg.rows(), 0.0);
  double neg_sum = 0.0;
  bool active = false;
  for (std::size_t j = 0; j < nll.size(); ++j) {
    if (std::isnan(nll[j])) throw NumericError("contrastive_objective: NaN contrastive NLL");
    if (nll[j] < tau) {
      weights[j] = -w;
      active = true;
      neg_sum += nll[j];
    } else {
      neg_sum += tau;
    }
  }
  if (active) backward_weighted(model, rec, weights);
  const double loss = pos_loss - neg_sum * w;
  if (!std::isfinite(loss)) throw NumericError("contrastive_objective: non-finite loss");
  return loss;
}

double proxy_auroc(const FlowModel& model, const Matrix& inlier_val, const Matrix& contrastive_val) {
  if (inlier_val.rows() == 0 || contrastive_val.rows() == 0) {
    throw DegenerateInputError("proxy_auroc: validation sets must be non-empty");
  }
  return auroc(outlier_score(model, inlier_val), outlier_score(model, contrastive_val));
}

EpsilonChoice select_epsilon(const FlowModel& nll_model, const Matrix& inlier_val, double quantile, double offset) {
  if (inlier_val.rows() == 0) throw DegenerateInputError("select_epsilon: empty validation set");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw ConfigError("select_epsilon: quantile must lie in [0, 1]");
  auto lp = log_prob(nll_model, inlier_val);
  std::sort(lp.begin(), lp.end());
  const double pos = quantile * static_cast<double>(lp.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, lp.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  const double q = frac == 0.0 ? lp[lo] : lp[lo] + frac * (lp[hi] - lp[lo]);
  const double eps = q + offset;
  return {eps, -eps};
}

TrainResult train(const FlowModel& model, const Matrix& inliers, const Matrix& contrastive, const TrainConfig& cfg) {
  cfg.validate();
  if (inliers.rows() == 0) throw DegenerateInputError("train: inlier set is empty");
  if (inliers.cols() != model.dim()) throw DimensionError("train: inlier dimension does not match the model");
  if (contrastive.rows() > 0 && contrastive.cols() != model.dim()) {
    throw DimensionError("train: contrastive dimension does not match the model");
  }
  if (cfg.objective != Objective::nll && contrastive.rows() == 0) {
    throw DegenerateInputError("train: contrastive set required for objective " + objective_name(cfg.objective));
  }
  TrainResult out{model, {}};
  Trainer t(out.model, inliers, contrastive, cfg);
  switch (cfg.objective) {
    case Objective::nll:
      t.run({Objective::nll, cfg.max_epochs, true}, out.history);
      break;
    case Objective::contrastive:
      t.run({Objective::contrastive, cfg.max_epochs, true}, out.history);
      break;
    case Objective::cf_ft:
      t.run({Objective::nll, cfg.max_epochs, true}, out.history);
      t.reset_optimizer();
      t.run({Objective::contrastive, cfg.finetune_epochs, false}, out.history);
      break;
  }
  return out;
}

}  // namespace cflow
