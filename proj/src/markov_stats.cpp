#include "flowlab/markov_stats.hpp"

#include "flowlab/stats.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>

namespace flowlab {

namespace {

constexpr double kZ95 = 1.959963984540054;

SimulationConfig with_horizon(const SimulationConfig& config, double T) {
  SimulationConfig c = config;
  c.horizon = T;
  c.validate();
  return c;
}

}  // namespace

SemigroupProfile semigroup_map(const SdeProblem& problem, const SimulationConfig& config, const StateFn& f,
                               double f_sup, double t, const std::vector<Vec>& x_grid) {
  if (x_grid.empty()) throw Error(ErrorCode::InvalidArgument, "semigroup_map: empty grid");
  for (const Vec& x : x_grid)
    if (x.size() != problem.field.dim) throw Error(ErrorCode::InvalidArgument, "semigroup_map: grid dimension mismatch");
  SemigroupProfile p;
  p.t = t;
  p.f_sup = f_sup;
  p.x_grid = x_grid;
  SimulationConfig c = with_horizon(config, t);
  const std::size_t n = c.n_paths;
  std::vector<double> samples(n);
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    c.stream_offset = config.stream_offset + (static_cast<std::uint64_t>(i) << 32);
    run_paths(problem.field, c, x_grid[i], [&](std::size_t path, const StepView& v) {
      if (!v.increment) samples[path] = f(v.states[0]);
    });
    const auto e = stats::mean(samples);
    p.values.push_back(e.value);
    p.std_errors.push_back(e.std_error);
    p.bounded = p.bounded && std::abs(e.value) <= f_sup + 3.0 * e.std_error;
  }
  for (std::size_t i = 0; i + 1 < x_grid.size(); ++i) {
    const double dx = (x_grid[i + 1] - x_grid[i]).norm();
    if (!(dx > 0.0)) throw Error(ErrorCode::InvalidArgument, "semigroup_map: repeated grid point");
    const double slope = std::abs(p.values[i + 1] - p.values[i]) / dx;
    if (slope > p.modulus || i == 0) {
      p.modulus = slope;
      p.modulus_index = i;
      p.modulus_se = std::hypot(p.std_errors[i], p.std_errors[i + 1]) / dx;
    }
  }
  return p;
}

SemigroupRefinement semigroup_refinement(const SdeProblem& problem, const SimulationConfig& config, const StateFn& f,
                                         double f_sup, double t, const std::vector<Vec>& coarse,
                                         const std::vector<Vec>& fine) {
  SemigroupRefinement r;
  r.coarse = semigroup_map(problem, config, f, f_sup, t, coarse);
  SimulationConfig c = config;
  c.stream_offset = config.stream_offset + (std::uint64_t{1} << 48);
  r.fine = semigroup_map(problem, c, f, f_sup, t, fine);
  r.pooled_se = std::hypot(r.coarse.modulus_se, r.fine.modulus_se);
  r.stable = r.fine.modulus <= r.coarse.modulus + 3.0 * r.pooled_se;
  r.verdict = r.stable && r.coarse.bounded && r.fine.bounded ? Verdict::Pass : Verdict::Fail;
  return r;
}

const char* to_string(HittingMethod m) { return m == HittingMethod::Naive ? "naive" : "girsanov"; }

HittingEstimate hitting_probability(const SdeProblem& problem, const SimulationConfig& config, const Vec& x0,
                                    const Vec& y0, double a, double T) {
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "hitting_probability: radius must be positive");
  const SimulationConfig c = with_horizon(config, T);
  HittingEstimate h;
  h.method = HittingMethod::Naive;
  h.x0 = x0;
  h.y0 = y0;
  h.a = a;
  h.T = T;
  h.n_paths = c.n_paths;
  std::vector<unsigned char> hit(c.n_paths, 0);
  const auto status = run_paths(problem.field, c, x0, [&](std::size_t path, const StepView& v) {
    if (!v.increment) hit[path] = !v.status[0].terminated() && (v.states[0] - y0).norm() <= a;
  });
  std::size_t exploded = 0;
  for (std::size_t p = 0; p < c.n_paths; ++p) {
    h.successes += hit[p];
    exploded += status[p].terminated();
  }
  const double n = static_cast<double>(c.n_paths);
  h.p_hat = static_cast<double>(h.successes) / n;
  h.std_error = std::sqrt(h.p_hat * (1.0 - h.p_hat) / n);
  std::tie(h.ci_low, h.ci_high) = stats::wilson_interval(h.successes, c.n_paths, kZ95);
  h.ess = n;
  h.exploded_fraction = static_cast<double>(exploded) / n;
  if (h.successes == 0) {
    h.verdict = Verdict::Unresolved;
    h.warnings.push_back("no path reached the target; the girsanov method may resolve it");
  } else {
    h.verdict = h.ci_low > 0.0 ? Verdict::Pass : Verdict::Fail;
  }
  return h;
}

Vec steering_control(const Mat& sigma, const Vec& y, const Vec& y0, double m) {
  if (m == 0.0) return Vec::Zero(sigma.cols());
  const Mat a = sigma * sigma.transpose();
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorCode::SolverFailure, "steering: sigma sigma^T is singular");
  const Vec v = lu.solve(y - y0);
  return -m * (sigma.transpose() * v);
}

HittingEstimate girsanov_hitting(const SdeProblem& problem, const SimulationConfig& config, const Vec& x0,
                                 const Vec& y0, double a, double T, double m, double N) {
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "girsanov_hitting: radius must be positive");
  if (m < 0.0) m = 4.0 / T;
  if (!(N > 0.0)) N = 10.0 * (1.0 + x0.norm() + y0.norm());
  const SimulationConfig c = with_horizon(config, T);

  CoefficientField field = problem.field;
  {
    const auto drift = problem.field.drift;
    const auto diffusion = problem.field.diffusion;
    field.drift = [drift, diffusion, y0, m](double t, const Vec& y) -> Vec {
      if (m == 0.0) return drift(t, y);
      const Mat s = diffusion(t, y);
      return drift(t, y) + s * steering_control(s, y, y0, m);
    };
  }

  const std::size_t n = c.n_paths;
  std::vector<double> log_w(n, 0.0);
  std::vector<unsigned char> stopped(n, 0), hit(n, 0);
  const auto status = run_paths(field, c, x0, [&](std::size_t path, const StepView& v) {
    const Vec& y = v.states[0];
    if (!stopped[path] && !(y.norm() < N)) stopped[path] = 1;
    if (!v.increment) {
      hit[path] = !stopped[path] && !v.status[0].terminated() && (y - y0).norm() <= a;
      return;
    }
    if (stopped[path] || v.status[0].terminated() || m == 0.0) return;
    const Vec u = steering_control(problem.field.sigma(v.t, y), y, y0, m);
    log_w[path] += -u.dot(*v.increment) - 0.5 * u.squaredNorm() * v.h;
  });

  HittingEstimate h;
  h.method = HittingMethod::Girsanov;
  h.x0 = x0;
  h.y0 = y0;
  h.a = a;
  h.T = T;
  h.m = m;
  h.N = N;
  h.n_paths = n;
  std::size_t truncated = 0, exploded = 0;
  std::vector<double> hit_lw;
  for (std::size_t p = 0; p < n; ++p) {
    truncated += stopped[p];
    exploded += status[p].terminated();
    if (hit[p]) {
      ++h.successes;
      hit_lw.push_back(log_w[p]);
    }
  }
  const double nn = static_cast<double>(n);
  h.truncated_fraction = static_cast<double>(truncated) / nn;
  h.exploded_fraction = static_cast<double>(exploded) / nn;

  // Weighted indicator mean and its standard error, scaled by the largest weight.
  if (!hit_lw.empty()) {
    const double top = *std::max_element(hit_lw.begin(), hit_lw.end());
    double s1 = 0.0, s2 = 0.0;
    for (double lw : hit_lw) {
      const double w = std::exp(lw - top);
      s1 += w;
      s2 += w * w;
    }
    const double mean_scaled = s1 / nn;
    const double var_scaled = std::max(0.0, (s2 - nn * mean_scaled * mean_scaled) / (nn - 1.0));
    h.p_hat = std::exp(top) * mean_scaled;
    h.std_error = n > 1 ? std::exp(top) * std::sqrt(var_scaled / nn) : 0.0;
  }
  h.ci_low = std::max(0.0, h.p_hat - kZ95 * h.std_error);
  h.ci_high = h.p_hat + kZ95 * h.std_error;
  h.ess = std::exp(2.0 * stats::log_sum_exp(log_w) - [&] {
    std::vector<double> twice(n);
    for (std::size_t p = 0; p < n; ++p) twice[p] = 2.0 * log_w[p];
    return stats::log_sum_exp(twice);
  }());
  if (h.ess < 0.01 * nn) h.warnings.push_back("effective sample size below 1% of paths; weights are degenerate");
  if (!std::isfinite(h.p_hat)) h.warnings.push_back("weight overflow");
  if (h.successes == 0) h.verdict = Verdict::Unresolved;
  else h.verdict = h.ci_low > 0.0 ? Verdict::Pass : Verdict::Fail;
  return h;
}

}  // namespace flowlab
