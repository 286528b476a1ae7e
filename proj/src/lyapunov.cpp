#include "flowlab/lyapunov.hpp"

#include "flowlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flowlab {

double exp_lambda_threshold(const SdeProblem& problem, double alpha) {
  if (problem.growth && problem.growth->alpha == alpha && problem.growth->coercivity_constant)
    return 2.0 * alpha * problem.growth->coercivity_constant(alpha + 1.0);
  return 2.0 * alpha * coercivity_constant(problem.field, alpha, alpha + 1.0);
}

double poly_lambda_threshold(const SdeProblem& problem, double p) {
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "poly moment order must be >= 1");
  const auto& f = problem.field;
  const double sup = maximize_radial(f.dim, [&](const Vec& x) {
    return (2.0 * x.dot(f.b(0.0, x)) + (2.0 * p - 1.0) * f.sigma(0.0, x).squaredNorm()) / (1.0 + x.squaredNorm());
  });
  return p * sup;
}

namespace {

struct Sampled {
  // values[time][path]
  std::vector<std::vector<double>> values;
  double exploded_fraction = 0.0;
};

Sampled sample(const CoefficientField& field, const SimulationConfig& config, const Vec& x,
               const std::vector<double>& times, const std::function<double(double, const Vec&)>& g) {
  const TimeGrid grid(config.dt, config.horizon);
  std::vector<std::size_t> idx;
  for (double t : times) idx.push_back(grid.index_of(t));
  Sampled s;
  s.values.assign(times.size(), std::vector<double>(config.n_paths, 0.0));
  const auto status = run_paths(field, config, x, [&](std::size_t path, const StepView& v) {
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (idx[j] == v.step) s.values[j][path] = g(times[j], v.states[0]);
  });
  std::size_t exploded = 0;
  for (const auto& st : status) exploded += st.exploded ? 1 : 0;
  s.exploded_fraction = static_cast<double>(exploded) / static_cast<double>(config.n_paths);
  return s;
}

bool admissible(double lambda, double threshold) {
  return lambda >= threshold - 1e-9 * std::max(1.0, std::abs(threshold));
}

std::vector<MomentReport> moment_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                       const std::vector<double>& times, bool estimate_bias,
                                       const std::function<double(double, const Vec&)>& g,
                                       const std::function<double(double)>& bound, double lambda,
                                       double threshold) {
  if (x.size() != problem.field.dim) throw Error(ErrorCode::InvalidArgument, "start point dimension mismatch");
  if (times.empty()) throw Error(ErrorCode::InvalidArgument, "no check times");
  const Sampled base = sample(problem.field, config, x, times, g);
  Sampled fine;
  if (estimate_bias) {
    SimulationConfig half = config;
    half.dt = config.dt / 2.0;
    fine = sample(problem.field, half, x, times, g);
  }
  const bool premise = admissible(lambda, threshold);
  std::vector<MomentReport> out;
  for (std::size_t j = 0; j < times.size(); ++j) {
    MomentReport r;
    r.time = times[j];
    const auto est = stats::mean(base.values[j]);
    r.estimate = est.value;
    r.std_error = est.std_error;
    r.n_paths = est.n;
    r.bound = bound(times[j]);
    if (estimate_bias) r.bias = std::abs(est.value - stats::mean(fine.values[j]).value);
    r.tail_fraction = stats::top_share(base.values[j], 1e-3);
    r.exploded_fraction = std::max(base.exploded_fraction, estimate_bias ? fine.exploded_fraction : 0.0);
    r.pass = r.estimate <= r.bound + 3.0 * r.std_error + r.bias;
    if (r.exploded_fraction > 0.0) {
      r.verdict = Verdict::Inconclusive;
      r.note = "exploded paths present";
    } else if (!std::isfinite(r.estimate)) {
      r.verdict = Verdict::Inconclusive;
      r.note = "non-finite estimate";
    } else if (r.tail_fraction > 0.5 && r.std_error > 0.0) {
      r.verdict = Verdict::Inconclusive;
      r.note = "top 0.1% of paths carry more than half of the estimate";
    } else if (!premise) {
      r.verdict = Verdict::UnverifiedPremise;
      r.note = "lambda below the admissible threshold";
    } else {
      r.verdict = r.pass ? Verdict::Pass : Verdict::Fail;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<MomentReport> exp_moment_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                           const LyapunovSpec& spec, const std::vector<double>& times,
                                           bool estimate_bias) {
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "exp_moment_check needs alpha in (0,1]");
  const double alpha = spec.alpha, lambda = spec.lambda;
  auto g = [alpha, lambda](double t, const Vec& y) {
    return std::exp(std::exp(-lambda * t) * std::pow(1.0 + y.squaredNorm(), alpha));
  };
  const double b0 = std::exp(std::pow(1.0 + x.squaredNorm(), alpha));
  return moment_check(problem, config, x, times, estimate_bias, g, [b0](double) { return b0; }, lambda,
                      exp_lambda_threshold(problem, alpha));
}

std::vector<MomentReport> poly_moment_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                            double p, double lambda, const std::vector<double>& times,
                                            bool estimate_bias) {
  const double threshold = poly_lambda_threshold(problem, p);
  auto g = [p](double, const Vec& y) { return std::pow(1.0 + y.squaredNorm(), p); };
  const double w = std::pow(1.0 + x.squaredNorm(), p);
  return moment_check(problem, config, x, times, estimate_bias, g,
                      [w, lambda](double t) { return std::exp(lambda * t) * w; }, lambda, threshold);
}

SupermartingaleReport supermartingale_test(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                           const LyapunovSpec& spec, double radius,
                                           const std::vector<double>& times) {
  if (!(radius > 0.0) || radius > config.explosion_cap)
    throw Error(ErrorCode::InvalidArgument, "stopping radius must lie in (0, R_cap]");
  if (times.size() < 2) throw Error(ErrorCode::InvalidArgument, "supermartingale_test needs at least two times");
  const TimeGrid grid(config.dt, config.horizon);
  std::vector<std::size_t> idx;
  for (double t : times) idx.push_back(grid.index_of(t));

  const double alpha = spec.alpha, lambda = spec.lambda;
  auto f = [alpha, lambda](double t, const Vec& y) {
    return std::exp(std::exp(-lambda * t) * std::pow(1.0 + y.squaredNorm(), alpha));
  };

  const std::size_t n = config.n_paths;
  std::vector<std::vector<double>> values(times.size(), std::vector<double>(n, 0.0));
  struct Stop {
    bool stopped = false;
    double t = 0.0;
    Vec x;
  };
  std::vector<Stop> stops(n);
  const auto status = run_paths(problem.field, config, x, [&](std::size_t path, const StepView& v) {
    Stop& s = stops[path];
    if (!s.stopped && v.states[0].norm() >= radius) {
      s.stopped = true;
      s.t = v.t;
      s.x = v.states[0];
    }
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (idx[j] == v.step) values[j][path] = s.stopped ? f(s.t, s.x) : f(v.t, v.states[0]);
  });

  SupermartingaleReport r;
  r.times = times;
  r.radius = radius;
  std::size_t exploded = 0;
  for (const auto& st : status) exploded += st.exploded ? 1 : 0;
  r.exploded_fraction = static_cast<double>(exploded) / static_cast<double>(n);
  double scale = 0.0;
  for (const auto& col : values) {
    const auto e = stats::mean(col);
    r.estimates.push_back(e.value);
    r.std_errors.push_back(e.std_error);
    scale = std::max(scale, std::abs(e.value));
  }
  r.pass = true;
  std::vector<double> diff(n);
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) diff[i] = values[j + 1][i] - values[j][i];
    const auto e = stats::mean(diff);
    r.increments.push_back(e.value);
    r.increment_errors.push_back(e.std_error);
    if (!(e.value <= 3.0 * e.std_error + 1e-12 * scale)) r.pass = false;
  }
  r.verdict = r.exploded_fraction > 0.0 ? Verdict::Inconclusive : (r.pass ? Verdict::Pass : Verdict::Fail);
  return r;
}

CoefficientField steered_field(const CoefficientField& field, const Vec& y0, double m) {
  CoefficientField out = field;
  auto drift = field.drift;
  out.drift = [drift, y0, m](double t, const Vec& y) -> Vec { return drift(t, y) - m * (y - y0); };
  return out;
}

SteeringReport steering_contraction_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x0,
                                          const Vec& y0, std::vector<double> m_values) {
  if (m_values.empty()) throw Error(ErrorCode::InvalidArgument, "steering check needs at least one m");
  for (double m : m_values)
    if (!(m > 0.0)) throw Error(ErrorCode::InvalidArgument, "steering rates must be positive");
  std::sort(m_values.begin(), m_values.end());
  const TimeGrid grid(config.dt, config.horizon);
  const std::size_t steps = grid.steps();
  const std::size_t stride = std::max<std::size_t>(1, steps / 100);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < steps; k += stride) idx.push_back(k);
  if (idx.back() != steps) idx.push_back(steps);
  const double delta2 = (x0 - y0).squaredNorm();

  SteeringReport report;
  const std::size_t n = config.n_paths;
  std::vector<std::vector<double>> sq(idx.size(), std::vector<double>(n));
  std::vector<double> sup(n);
  for (double m : m_values) {
    const CoefficientField field = steered_field(problem.field, y0, m);
    std::fill(sup.begin(), sup.end(), 0.0);
    const auto status = run_paths(field, config, x0, [&](std::size_t path, const StepView& v) {
      const Vec& y = v.states[0];
      sup[path] = std::max(sup[path], y.squaredNorm());
      const auto it = std::lower_bound(idx.begin(), idx.end(), v.step);
      if (it != idx.end() && *it == v.step) sq[static_cast<std::size_t>(it - idx.begin())][path] = (y - y0).squaredNorm();
    });
    SteeringLevel level;
    level.m = m;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto e = stats::mean(sq[j]);
      level.times.push_back(grid.time(idx[j]));
      level.mean_sq.push_back(e.value);
      level.std_errors.push_back(e.std_error);
    }
    std::size_t exploded = 0;
    for (const auto& st : status) exploded += st.exploded ? 1 : 0;
    level.exploded_fraction = static_cast<double>(exploded) / static_cast<double>(n);
    const auto full = stats::mean(sup);
    const auto half = stats::mean(std::span<const double>(sup.data(), std::max<std::size_t>(1, n / 2)));
    level.sup_moment = full.value;
    level.sup_moment_half = half.value;
    level.sup_moment_se = half.std_error;
    level.sup_stable = std::isfinite(full.value) && std::abs(full.value - half.value) <= 3.0 * half.std_error + 1e-12 * std::abs(full.value);
    report.levels.push_back(std::move(level));
  }

  // Fit on the gentlest steering rate.
  const SteeringLevel& fit = report.levels.front();
  const double sm = std::sqrt(fit.m);
  report.C1 = sm * fit.mean_sq.back();
  report.C0 = 1.0;
  if (delta2 > 0.0) {
    for (std::size_t j = 0; j < fit.times.size(); ++j) {
      const double decay = std::exp(-fit.m * fit.times[j]) * delta2;
      report.C0 = std::max(report.C0, (fit.mean_sq[j] - report.C1 / sm) / decay);
    }
  }

  bool all = true, exploded = false;
  for (auto& level : report.levels) {
    level.bound_holds = true;
    for (std::size_t j = 0; j < level.times.size(); ++j) {
      const double b = report.C0 * std::exp(-level.m * level.times[j]) * delta2 + report.C1 / std::sqrt(level.m);
      level.bound.push_back(b);
      const double slack = 3.0 * level.std_errors[j] + 1e-12 * std::max(1.0, b);
      if (!(level.mean_sq[j] <= b + slack)) level.bound_holds = false;
    }
    all = all && level.bound_holds && level.sup_stable;
    exploded = exploded || level.exploded_fraction > 0.0;
  }
  report.pass = all;
  report.verdict = exploded ? Verdict::Inconclusive : (all ? Verdict::Pass : Verdict::Fail);
  return report;
}

}  // namespace flowlab
