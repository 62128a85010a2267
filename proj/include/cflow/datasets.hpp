#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cflow/gaussian.hpp"
#include "cflow/matrix.hpp"
#include "cflow/rng.hpp"

namespace cflow {

enum class Label : std::uint8_t { inlier = 0, outlier = 1, contrastive = 2 };

// Sample vectors (rows) with optional per-sample labels.
struct FeatureSet {
  Matrix data;
  std::vector<Label> labels;  // empty, or one per row
  std::string provenance;

  std::size_t size() const { return data.rows(); }
  std::size_t dim() const { return data.cols(); }
  bool has_labels() const { return !labels.empty(); }

  // Throws on label-count mismatch or non-finite data.
  void validate() const;

  // Subset of rows; labels follow.
  FeatureSet subset(std::span<const std::size_t> idx) const;
  // Rows carrying label `l`.
  Matrix rows_with(Label l) const;
};

FeatureSet gen_gaussian(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

struct MixSpec {
  FeatureSet broad;
  FeatureSet other;
  double mu = 1.0;  // fraction of the result drawn from `broad`
  std::size_t total = 0;
  std::uint64_t seed = 0;
};

struct MixedSet {
  FeatureSet set;
  std::vector<std::uint8_t> from_broad;  // 1 where the row came from the broad source
};

// round(mu * total) rows from the broad source, the rest from the other one,
// jointly shuffled. Sources are drawn without replacement, cycling through a
// fresh shuffle when a source is smaller than its quota.
MixedSet mix_datasets(const MixSpec& spec);

// Rows scaled to unit L2 norm, then N(0, noise_sigma^2) added per coordinate.
FeatureSet hypersphere_normalize(const FeatureSet& set, double noise_sigma, std::uint64_t seed);

// Each column permuted independently: marginals kept, joint structure destroyed.
FeatureSet permute_marginals(const FeatureSet& set, std::uint64_t seed);

struct Split {
  FeatureSet train;
  FeatureSet val;
  FeatureSet test;
};

// Seeded shuffle cut into consecutive pieces of round(f_i * n) rows. When the
// fractions sum to one, the train piece absorbs rounding so every row is used.
Split split(const FeatureSet& set, std::array<double, 3> fractions, std::uint64_t seed);

// Deterministic permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace cflow
