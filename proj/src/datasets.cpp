#include "cflow/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cflow/error.hpp"
#include "cflow/rng.hpp"

namespace cflow {

void FeatureSet::validate() const {
  if (!labels.empty() && labels.size() != data.rows()) {
    throw DimensionError("feature set has " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(data.rows()) + " rows");
  }
  if (!data.all_finite()) throw NumericError("feature set contains non-finite values");
}

FeatureSet FeatureSet::subset(std::span<const std::size_t> idx) const {
  FeatureSet out;
  out.data = data.gather_rows(idx);
  if (has_labels()) {
    out.labels.reserve(idx.size());
    for (auto i : idx) out.labels.push_back(labels.at(i));
  }
  out.provenance = provenance;
  return out;
}

Matrix FeatureSet::rows_with(Label l) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == l) idx.push_back(i);
  return data.gather_rows(idx);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

FeatureSet gen_gaussian(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_gaussian: n must be >= 1");
  const std::size_t d = spec.dim();
  Rng rng = make_rng(seed, 0);
  FeatureSet out;
  out.data = Matrix(n, d);
  std::vector<double> e(d);
  const Matrix& l = spec.cholesky();
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : e) v = standard_normal(rng);
    for (std::size_t r = 0; r < d; ++r) {
      double s = spec.mean()[r];
      for (std::size_t c = 0; c <= r; ++c) s += l(r, c) * e[c];
      out.data(i, r) = s;
    }
  }
  std::ostringstream prov;
  prov << "gaussian(d=" << d << ",n=" << n << ",seed=" << seed << ")";
  out.provenance = prov.str();
  return out;
}

namespace {

// `count` row indices from a source of size n: successive fresh shuffles.
std::vector<std::size_t> draw_rows(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto perm = shuffled_indices(n, rng);
    const std::size_t take = std::min(n, count - out.size());
    out.insert(out.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

}  // namespace

MixedSet mix_datasets(const MixSpec& spec) {
  if (!(spec.mu >= 0.0 && spec.mu <= 1.0)) throw ConfigError("mix_datasets: mu must lie in [0, 1]");
  const std::size_t n_broad = static_cast<std::size_t>(std::llround(spec.mu * static_cast<double>(spec.total)));
  const std::size_t n_other = spec.total - n_broad;
  if (n_broad > 0 && spec.broad.size() == 0) throw ConfigError("mix_datasets: broad source is empty");
  if (n_other > 0 && spec.other.size() == 0) throw ConfigError("mix_datasets: other source is empty");
  if (spec.broad.size() > 0 && spec.other.size() > 0 && spec.broad.dim() != spec.other.dim()) {
    throw DimensionError("mix_datasets: sources differ in dimension");
  }
  const std::size_t d = spec.broad.size() > 0 ? spec.broad.dim() : spec.other.dim();

  Rng rng = make_rng(spec.seed, 0);
  const auto broad_rows = draw_rows(spec.broad.size(), n_broad, rng);
  const auto other_rows = draw_rows(spec.other.size(), n_other, rng);
  const auto order = shuffled_indices(spec.total, rng);

  MixedSet out;
  out.set.data = Matrix(spec.total, d);
  out.set.labels.assign(spec.total, Label::contrastive);
  out.from_broad.resize(spec.total);
  for (std::size_t k = 0; k < spec.total; ++k) {
    const std::size_t src = order[k];
    const bool broad = src < n_broad;
    const Matrix& m = broad ? spec.broad.data : spec.other.data;
    const std::size_t row = broad ? broad_rows[src] : other_rows[src - n_broad];
    std::copy_n(m.row(row).data(), d, out.set.data.row(k).data());
    out.from_broad[k] = broad ? 1 : 0;
  }
  std::ostringstream prov;
  prov << "mix(mu=" << spec.mu << ",total=" << spec.total << ",seed=" << spec.seed << ")";
  out.set.provenance = prov.str();
  return out;
}

FeatureSet hypersphere_normalize(const FeatureSet& set, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("hypersphere_normalize: noise sigma must be >= 0");
  std::vector<std::size_t> zero_rows;
  FeatureSet out = set;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double sq = 0.0;
    for (double v : set.data.row(i)) sq += v * v;
    if (sq == 0.0) {
      zero_rows.push_back(i);
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : out.data.row(i)) v *= inv;
  }
  if (!zero_rows.empty()) {
    std::ostringstream msg;
    msg << "hypersphere_normalize: zero-norm rows:";
    for (auto r : zero_rows) msg << ' ' << r;
    throw DegenerateInputError(msg.str());
  }
  if (noise_sigma > 0.0) {
    Rng rng = make_rng(seed, 0);
    for (double& v : out.data.values()) v += noise_sigma * standard_normal(rng);
  }
  return out;
}

FeatureSet permute_marginals(const FeatureSet& set, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  FeatureSet out = set;
  for (std::size_t c = 0; c < set.dim(); ++c) {
    const auto perm = shuffled_indices(set.size(), rng);
    for (std::size_t i = 0; i < set.size(); ++i) out.data(i, c) = set.data(perm[i], c);
  }
  out.labels.clear();
  out.provenance = "permuted_marginals(" + set.provenance + ")";
  return out;
}

Split split(const FeatureSet& set, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
    sum += f;
  }
  if (sum > 1.0 + 1e-12) throw ConfigError("split: fractions sum to more than 1");
  const std::size_t n = set.size();
  std::array<std::size_t, 3> sizes{};
  for (std::size_t k = 0; k < 3; ++k) {
    sizes[k] = static_cast<std::size_t>(std::llround(fractions[k] * static_cast<double>(n)));
  }
  if (std::abs(sum - 1.0) <= 1e-12) {
    const std::size_t rest = std::min(n, sizes[1] + sizes[2]);
    sizes[0] = n - rest;
    sizes[2] = rest - std::min(rest, sizes[1]);
    sizes[1] = rest - sizes[2];
  } else {
    while (sizes[0] + sizes[1] + sizes[2] > n) {
      for (auto& s : sizes) if (s > 0 && sizes[0] + sizes[1] + sizes[2] > n) --s;
    }
  }
  Rng rng = make_rng(seed, 0);
  const auto perm = shuffled_indices(n, rng);
  auto piece = [&](std::size_t begin, std::size_t count) {
    return set.subset(std::span<const std::size_t>(perm.data() + begin, count));
  };
  Split out;
  out.train = piece(0, sizes[0]);
  out.val = piece(sizes[0], sizes[1]);
  out.test = piece(sizes[0] + sizes[1], sizes[2]);
  return out;
}

}  // namespace cflow
