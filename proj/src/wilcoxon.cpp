#include "cflow/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cflow/error.hpp"

namespace cflow {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("wilcoxon: paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    if (!std::isfinite(x)) throw NumericError("wilcoxon: non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  WilcoxonResult r;
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });

  // Doubled average ranks stay integral.
  std::vector<long> rank2(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  long w2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) w2 += rank2[i];
  r.w_plus = 0.5 * static_cast<double>(w2);

  const double n = static_cast<double>(r.n);
  if (r.n <= kWilcoxonExactMax) {
    long total = 0;
    for (long v : rank2) total += v;
    // prob[s] = P(doubled W+ == s) under random signs.
    std::vector<double> prob(static_cast<std::size_t>(total) + 1, 0.0);
    prob[0] = 1.0;
    long reach = 0;
    for (long v : rank2) {
      for (long s = reach; s >= 0; --s) {
        const double p = prob[static_cast<std::size_t>(s)] * 0.5;
        prob[static_cast<std::size_t>(s)] = p;
        prob[static_cast<std::size_t>(s + v)] += p;
      }
      reach += v;
    }
    double tail = 0.0;
    for (long s = w2; s <= total; ++s) tail += prob[static_cast<std::size_t>(s)];
    r.p_value = std::min(1.0, tail);
    r.exact = true;
    return r;
  }
  const double mean = n * (n + 1) / 4;
  const double var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48;
  const double z = (r.w_plus - mean - 0.5) / std::sqrt(var);
  r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  r.exact = false;
  return r;
}

}  // namespace cflow
