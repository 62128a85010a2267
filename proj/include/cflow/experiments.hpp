#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cflow/datasets.hpp"
#include "cflow/methods.hpp"
#include "cflow/metrics.hpp"
#include "cflow/oracle.hpp"
#include "cflow/wilcoxon.hpp"

namespace cflow {

// ---- 1-D toy: N(0,1) inliers vs N(1, sd 2) contrastive ----

struct Toy1dConfig {
  std::size_t n_inlier = 20000;
  std::size_t n_contrastive = 20000;
  double epsilon = -6.0;  // contrastive log-density floor; tau = -epsilon
  FlowConfig flow{.dim = 1, .blocks = 8};
  TrainConfig train{.batch = 1024, .lr = 3e-3, .max_epochs = 40, .val_fraction = 0.0};
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  std::size_t grid_n = 1201;
  std::uint64_t seed = 0;
};

struct Toy1dResult {
  GridDensity learned;
  GridDensity oracle;  // normalized positive difference
  double tv = 0.0;
  double tv_to_p = 0.0;
  double oracle_integral = 0.0;
  double seconds = 0.0;
  TrainHistory history;
};

Toy1dResult run_toy1d(const Toy1dConfig& cfg);
// learned_density.csv, oracle_density.csv, tv.json, history.json
void write_toy1d(const Toy1dResult& r, const std::string& dir);

// ---- clamp sweep on the 1-D toy ----

struct ClampSweepConfig {
  Toy1dConfig base;
  std::vector<double> epsilons{-6.0, -3.0, 0.0};
};

struct ClampSweepRow {
  double epsilon;
  GridDensity learned;
  double tv_to_pbar;
  double tv_to_p;
};

std::vector<ClampSweepRow> run_clamp_sweep(const ClampSweepConfig& cfg);
// density_eps_<k>.csv per row plus clamp_sweep.csv (epsilon,tv_to_pbar,tv_to_p)
void write_clamp_sweep(const std::vector<ClampSweepRow>& rows, const std::string& dir);

// ---- 2-D toy: N([1,1], I) inliers vs N(0, I) contrastive ----

struct Toy2dConfig {
  std::size_t n_inlier = 8000;
  std::size_t n_contrastive = 8000;
  std::size_t n_eval = 4000;  // held-out inliers for the percentile check
  double epsilon = -6.0;
  FlowConfig flow{.dim = 2, .blocks = 8, .hidden = 64};
  TrainConfig train{.batch = 512, .lr = 2e-3, .max_epochs = 25, .val_fraction = 0.0};
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  std::size_t grid_n = 121;
  std::array<double, 2> corner{-5.0, -5.0};
  std::size_t n_samples_out = 2000;  // rows per class written to samples.csv
  std::uint64_t seed = 0;
};

struct Toy2dResult {
  GridDensity cf_grid;     // exp(log p_cf)
  GridDensity ratio_grid;  // exp(log p_in - log p_contr)
  Matrix samples;          // inliers then contrastive, n_samples_out each
  double cf_corner = 0.0, cf_center = 0.0, cf_inlier_p01 = 0.0;
  double ratio_corner = 0.0, ratio_center = 0.0, ratio_inlier_p01 = 0.0;
};

Toy2dResult run_toy2d(const Toy2dConfig& cfg);
// cf_grid.csv, ratio_grid.csv, samples.csv, corner.json
void write_toy2d(const Toy2dResult& r, const std::string& dir);

// ---- synthetic clusters on the unit sphere ----

struct ClusterConfig {
  std::size_t dim = 8;
  std::size_t n_rest_clusters = 4;
  double spread = 0.25;    // sd of the Gaussian around a direction, before normalization
  double hard_cos = 0.6;   // cosine between the inlier and hard-outlier directions
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t n_broad = 8000;
  double noise = 0.01;
  std::uint64_t seed = 0;
};

struct ClusterWorld {
  Matrix inlier_train;
  Matrix inlier_pool;  // disjoint inlier draws used as contamination
  Matrix inlier_test;
  Matrix hard_train;   // known-outlier class available at training time
  Matrix hard_test;
  Matrix rest_test;    // other clusters, never seen in training
  Matrix broad;        // uniform on the sphere
};

ClusterWorld make_cluster_world(const ClusterConfig& cfg);

enum class SweepMode { contaminated, narrow, informed };
std::string sweep_mode_name(SweepMode m);
SweepMode parse_sweep_mode(std::string_view s);

struct MuSweepConfig {
  SweepMode mode = SweepMode::contaminated;
  std::vector<double> mus{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<Method> methods{Method::cf, Method::flow_ratio, Method::nll_flow};
  std::size_t reps = 3;
  std::size_t contrastive_total = 2000;
  // Contaminated mode: mix in the inlier training rows themselves rather
  // than a disjoint draw from the inlier distribution.
  bool contaminate_with_train = true;
  ClusterConfig clusters;
  // tau = 30 keeps the clamp active for 8-d sphere features, whose
  // log densities sit far above the 1-d toy scale.
  MethodConfig method{.flow = {.blocks = 8, .hidden = 64},
                      .train = {.batch = 256, .lr = 1e-3, .max_epochs = 40, .clamp_tau = 30.0, .patience = 10,
                                .val_fraction = 0.1}};
  std::uint64_t seed = 0;
};

struct MuSweepRow {
  Method method;
  double mu;
  double auroc_hard;  // mean over repetitions, in [0, 1]
  double auroc_rest;
  double sd;          // larger of the two repetition standard deviations
  double sd_hard;
  double sd_rest;
};

// Repetition r uses root seed + r for data, mixing and training.
std::vector<MuSweepRow> run_mu_sweep(const MuSweepConfig& cfg);
// Columns: method,mu,auroc_hard,auroc_rest,sd with AUROCs scaled to 0-100.
void write_mu_sweep_csv(std::ostream& os, const std::vector<MuSweepRow>& rows);

// ---- tabular data ----

struct TabularConfig {
  std::string csv_path;  // labelled CSV (label 0 inlier, 1 outlier); empty -> synthetic
  std::size_t dim = 8;
  double correlation = 0.9;  // Toeplitz rho^|i-j| inlier covariance
  std::size_t n_train = 5000;
  std::size_t n_test = 2000;
  std::vector<Method> methods{Method::nll_flow, Method::cf, Method::flow_ratio};
  // Inlier NLL sits near 5 and permuted rows near 35, so tau = 10 is active
  // where tau = 0 would saturate on every contrastive row.
  MethodConfig method{.flow = {.blocks = 8, .hidden = 64},
                      .train = {.batch = 256, .lr = 1e-3, .max_epochs = 40, .clamp_tau = 10.0, .patience = 10,
                                .val_fraction = 0.1}};
  std::uint64_t seed = 0;
};

std::vector<ScoreReport> run_tabular(const TabularConfig& cfg);

// ---- one-vs-rest on synthetic sphere clusters ----

struct OvrConfig {
  std::size_t dim = 128;
  std::size_t n_classes = 4;
  double spread = 0.2;
  std::size_t n_train = 1000;
  std::size_t n_test = 300;
  std::size_t n_contrastive = 2000;  // uniform on the sphere, shared by every row
  double noise = 0.01;
  std::vector<Method> methods{Method::cf, Method::nll_flow};
  MethodConfig method{.flow = {.blocks = 4, .hidden = 64},
                      .train = {.batch = 256, .lr = 1e-3, .max_epochs = 10, .clamp_tau = 0.0, .val_fraction = 0.0}};
  std::uint64_t seed = 0;
};

struct OvrComparison {
  Method a, b;
  WilcoxonResult test;  // per-class mean AUROCs of a against b
};

struct OvrReport {
  std::vector<Method> methods;
  std::vector<OneVsRestResult> results;  // one per method
  std::vector<OvrComparison> comparisons;  // first method against each other one
  double mean_auroc(std::size_t method_index) const;
};

std::vector<ClassData> make_sphere_classes(const OvrConfig& cfg);
OvrReport run_one_vs_rest(const OvrConfig& cfg);
// ovr_<method>.csv (class,auroc) and wilcoxon.json
void write_one_vs_rest(const OvrReport& r, const std::string& dir);

}  // namespace cflow
