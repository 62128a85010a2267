#pragma once

#include <cstddef>
#include <span>

namespace cflow {

struct WilcoxonResult {
  double w_plus = 0.0;   // sum of ranks of positive differences a - b
  std::size_t n = 0;     // pairs left after dropping zero differences
  double p_value = 1.0;  // one-sided, alternative a > b
  bool exact = true;
};

// Paired signed-rank test. Zero differences are dropped and tied |d| share
// their average rank. Exact null distribution for n <= kWilcoxonExactMax,
// tie-corrected normal approximation with continuity correction above.
// When every difference is zero the result is p = 1 with n = 0.
inline constexpr std::size_t kWilcoxonExactMax = 50;
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace cflow
