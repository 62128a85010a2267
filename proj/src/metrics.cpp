#include "cflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "cflow/error.hpp"
#include "json.hpp"

namespace cflow {
namespace {

void check_scores(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.empty() || b.empty()) throw DegenerateInputError(std::string(op) + ": both classes need at least one score");
  for (double v : a)
    if (std::isnan(v)) throw NumericError(std::string(op) + ": NaN score");
  for (double v : b)
    if (std::isnan(v)) throw NumericError(std::string(op) + ": NaN score");
}

}  // namespace

std::vector<double> outlier_score(const FlowModel& model, const Matrix& x) {
  auto lp = log_prob(model, x);
  for (double& v : lp) v = -v;
  return lp;
}

double auroc(std::span<const double> inl, std::span<const double> outl) {
  check_scores(inl, outl, "auroc");
  // Rank-sum form with midranks for ties.
  struct Item {
    double s;
    bool out;
  };
  std::vector<Item> all;
  all.reserve(inl.size() + outl.size());
  for (double v : inl) all.push_back({v, false});
  for (double v : outl) all.push_back({v, true});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.s < b.s; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].s == all[i].s) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].out) rank_sum += mid;
    i = j;
  }
  const double n1 = static_cast<double>(outl.size()), n0 = static_cast<double>(inl.size());
  return (rank_sum - n1 * (n1 + 1) / 2) / (n0 * n1);
}

RocCurve roc_curve(std::span<const double> inl, std::span<const double> outl) {
  check_scores(inl, outl, "roc_curve");
  std::vector<double> a(inl.begin(), inl.end()), b(outl.begin(), outl.end());
  std::sort(a.rbegin(), a.rend());
  std::sort(b.rbegin(), b.rend());
  std::vector<double> thr(a);
  thr.insert(thr.end(), b.begin(), b.end());
  std::sort(thr.rbegin(), thr.rend());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t ia = 0, ib = 0;
  for (double t : thr) {
    while (ia < a.size() && a[ia] >= t) ++ia;
    while (ib < b.size() && b[ib] >= t) ++ib;
    roc.points.push_back({t, static_cast<double>(ia) / a.size(), static_cast<double>(ib) / b.size()});
  }
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& p = roc.points[i - 1];
    const auto& q = roc.points[i];
    roc.area += (q.fpr - p.fpr) * 0.5 * (p.tpr + q.tpr);
  }
  return roc;
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw ConfigError("histogram: need bins >= 1 and finite lo < hi");
  }
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double w = h.bin_width();
  for (double v : values) {
    if (std::isnan(v)) throw NumericError("histogram: NaN value");
    long k = v <= lo ? 0 : static_cast<long>(std::floor((v - lo) / w));
    k = std::clamp<long>(k, 0, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

ScoreReport make_score_report(std::string method, std::span<const double> inl, std::span<const double> outl,
                              std::size_t bins) {
  ScoreReport r;
  r.method = std::move(method);
  r.auroc = auroc(inl, outl);
  r.roc = roc_curve(inl, outl);
  r.scores.assign(inl.begin(), inl.end());
  r.scores.insert(r.scores.end(), outl.begin(), outl.end());
  r.is_outlier.assign(inl.size(), 0);
  r.is_outlier.insert(r.is_outlier.end(), outl.size(), 1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : r.scores)
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(lo < hi)) {
    // No spread to bin over: a unit window around the common value.
    const double c = std::isfinite(lo) ? lo : 0.0;
    lo = c - 0.5;
    hi = c + 0.5;
  }
  r.hist_in = histogram(inl, lo, hi, bins);
  r.hist_out = histogram(outl, lo, hi, bins);
  return r;
}

std::string to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["n_inliers"] = r.is_outlier.size() - static_cast<std::size_t>(std::count(r.is_outlier.begin(), r.is_outlier.end(), 1));
  j["n_outliers"] = static_cast<std::size_t>(std::count(r.is_outlier.begin(), r.is_outlier.end(), 1));
  j["auroc"] = r.auroc;
  auto fpr = nlohmann::ordered_json::array(), tpr = nlohmann::ordered_json::array();
  for (const auto& p : r.roc.points) {
    fpr.push_back(p.fpr);
    tpr.push_back(p.tpr);
  }
  j["roc"] = {{"fpr", fpr}, {"tpr", tpr}};
  auto edges = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i <= r.hist_in.counts.size(); ++i)
    edges.push_back(i == r.hist_in.counts.size() ? r.hist_in.hi : r.hist_in.lo + r.hist_in.bin_width() * i);
  j["histogram"] = {{"edges", edges}, {"count_in", r.hist_in.counts}, {"count_out", r.hist_out.counts}};
  return j.dump(2);
}

void write_roc_csv(std::ostream& os, const RocCurve& roc) {
  os << "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : roc.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    os << buf;
  }
}

void write_histogram_csv(std::ostream& os, const Histogram& in, const Histogram& out) {
  if (in.lo != out.lo || in.hi != out.hi || in.counts.size() != out.counts.size()) {
    throw DimensionError("histogram CSV: inlier and outlier bins differ");
  }
  os << "edge,count_in,count_out\n";
  char buf[96];
  const double w = in.bin_width();
  for (std::size_t i = 0; i < in.counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu\n", in.lo + w * static_cast<double>(i), in.counts[i], out.counts[i]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g,0,0\n", in.hi);
  os << buf;
}

}  // namespace cflow
