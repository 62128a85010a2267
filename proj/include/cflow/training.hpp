#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cflow/adam.hpp"
#include "cflow/error.hpp"
#include "cflow/flow.hpp"

namespace cflow {

enum class Objective { nll, contrastive, cf_ft };

std::string objective_name(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  std::size_t batch = 256;
  double lr = 1e-3;
  std::size_t max_epochs = 100;
  // Upper bound on the per-sample contrastive NLL (tau = -epsilon).
  double clamp_tau = 0.0;
  std::size_t patience = 10;
  // Share of each set held out for model selection. 0 disables selection:
  // the model after the last epoch is returned.
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  Objective objective = Objective::contrastive;
  std::size_t finetune_epochs = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;   // one per epoch run
  std::vector<double> proxy_auroc;  // NaN where no contrastive validation set exists
  std::vector<double> val_nll;      // NaN where no inlier validation set exists
  std::size_t best_epoch = 0;       // 1-based; 0 when no epoch ran
  bool stopped_early = false;

  std::size_t epochs() const { return train_loss.size(); }
};

// Keys: epoch, train_loss, proxy_auroc (null for NaN), best_epoch, stopped_early.
std::string to_json(const TrainHistory& h);

// Non-finite loss or gradient during training; carries the history so far.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainHistory h) : NumericError(what), history(std::move(h)) {}
  TrainHistory history;
};

// Zeroes gradients, accumulates the gradient of the mean NLL, returns it.
double nll_objective(FlowModel& model, const Matrix& batch);

// mean_i nll(x_i) - mean_j min(nll(y_j), tau). Zeroes gradients first.
// Contrastive samples at or above tau add nothing to the gradient; when all
// of them saturate, the gradient matches nll_objective bit for bit.
double contrastive_objective(FlowModel& model, const Matrix& pos, const Matrix& neg, double tau);

// AUROC with contrastive samples as the outlier class.
double proxy_auroc(const FlowModel& model, const Matrix& inlier_val, const Matrix& contrastive_val);

struct EpsilonChoice {
  double epsilon;  // lower bound on contrastive log density
  double tau;      // = -epsilon, bound on contrastive NLL
};

// Linear-interpolation quantile of the validation log densities plus offset.
EpsilonChoice select_epsilon(const FlowModel& nll_model, const Matrix& inlier_val, double quantile = 0.10,
                             double offset = std::log(10.0));

struct TrainResult {
  FlowModel model;
  TrainHistory history;
};

// Trains a copy of `model`. `contrastive` may be empty for the nll
// objective, in which case model selection uses validation NLL; when given,
// it also feeds proxy-AUROC selection for nll runs.
TrainResult train(const FlowModel& model, const Matrix& inliers, const Matrix& contrastive, const TrainConfig& cfg);

}  // namespace cflow
