#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cflow/flow.hpp"

namespace cflow {

// -log p(x) under the flow; larger means more anomalous.
std::vector<double> outlier_score(const FlowModel& model, const Matrix& x);

// Probability that a random outlier outscores a random inlier, ties counting
// one half, reported in [0, 1]. Throws DegenerateInputError if a class is empty.
double auroc(std::span<const double> inlier_scores, std::span<const double> outlier_scores);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double area = 0.0;             // trapezoid area under the points
};

// Thresholds at every distinct score in descending order.
RocCurve roc_curve(std::span<const double> inlier_scores, std::span<const double> outlier_scores);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

// Equal bins on [lo, hi], last bin closed. Values outside land in the edge bins.
Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

struct ScoreReport {
  std::string method;
  std::vector<double> scores;
  std::vector<std::uint8_t> is_outlier;  // one per score
  double auroc = 0.0;
  RocCurve roc;
  Histogram hist_in;   // same edges as hist_out
  Histogram hist_out;
};

// Scores, AUROC, ROC and histograms in one bundle. The histogram range spans
// the finite scores of both classes.
ScoreReport make_score_report(std::string method, std::span<const double> inlier_scores,
                              std::span<const double> outlier_scores, std::size_t bins = 50);

// Stable key order: method, n_inliers, n_outliers, auroc, roc, histogram.
std::string to_json(const ScoreReport& r);
// threshold,fpr,tpr
void write_roc_csv(std::ostream& os, const RocCurve& roc);
// edge,count_in,count_out with edge the left bin edge; a last row carries the
// right edge of the range and zero counts.
void write_histogram_csv(std::ostream& os, const Histogram& in, const Histogram& out);

}  // namespace cflow
