#include "flowlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace flowlab::stats {

Estimate mean(std::span<const double> values) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double m = sum / static_cast<double>(e.n);
  e.value = m;
  if (e.n < 2) return e;
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  e.std_error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  return e;
}

Estimate jackknife(std::span<const double> values, const std::function<double(double)>& g) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  const auto n = static_cast<double>(e.n);
  e.value = g(sum / n);
  if (e.n < 2) return e;

  std::vector<double> loo(e.n);
  double loo_mean = 0.0;
  for (std::size_t i = 0; i < e.n; ++i) {
    loo[i] = g((sum - values[i]) / (n - 1.0));
    loo_mean += loo[i];
  }
  loo_mean /= n;
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  e.std_error = std::sqrt((n - 1.0) / n * ss);
  return e;
}

double top_share(std::span<const double> values, double top_fraction) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  if (!(total > 0.0)) return 0.0;
  auto k = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(values.size())));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), std::greater<>());
  double top = 0.0;
  for (std::size_t i = 0; i < k; ++i) top += sorted[i];
  return top / total;
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // The closed form can leave a rounding residue at the boundaries.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace flowlab::stats
