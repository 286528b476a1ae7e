#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

namespace flowlab::stats {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Sample mean with its standard error (s/sqrt(n), which coincides with the
/// jackknife standard error of the mean).
Estimate mean(std::span<const double> values);

/// Jackknife estimate of g(mean(values)) computed with O(n) leave-one-out means.
Estimate jackknife(std::span<const double> values, const std::function<double(double)>& g);

/// Share of the total contributed by the largest `top_fraction` of values
/// (at least one value). Values are assumed nonnegative.
double top_share(std::span<const double> values, double top_fraction = 1e-3);

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

double normal_cdf(double x);

/// log(sum(exp(v))) evaluated without overflow; -inf for an empty span.
double log_sum_exp(std::span<const double> v);

}  // namespace flowlab::stats
