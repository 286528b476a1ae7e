#include "flowlab/occupation.hpp"

#include "flowlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowlab {

namespace {

double clipped(double v, std::size_t& clips) {
  if (v > kOccupationClip) {
    ++clips;
    return kOccupationClip;
  }
  if (v < -kOccupationClip) {
    ++clips;
    return -kOccupationClip;
  }
  if (std::isnan(v)) {
    ++clips;
    return kOccupationClip;
  }
  return v;
}

}  // namespace

OccupationEstimate occupation_integral(const PathEnsemble& e, const SpaceTimeFn& f) {
  OccupationEstimate out;
  std::vector<double> integrals(e.n_paths, 0.0);
  std::size_t clips = 0, evals = 0;
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < e.n_times(); ++k) {
      const double h = e.time_grid[k + 1] - e.time_grid[k];
      acc += clipped(f(e.time_grid[k], e.state_vec(p, k)), clips) * h;
      ++evals;
    }
    integrals[p] = acc;
  }
  const auto est = stats::mean(integrals);
  out.value = est.value;
  out.std_error = est.std_error;
  out.n_paths = est.n;
  out.clip_fraction = evals ? static_cast<double>(clips) / static_cast<double>(evals) : 0.0;
  return out;
}

OccupationSamples occupation_samples(const CoefficientField& field, const SimulationConfig& config, const Vec& x,
                                     const std::vector<SpaceTimeFn>& fs, std::optional<double> stop_radius) {
  OccupationSamples s;
  const std::size_t n = config.n_paths;
  s.integrals.assign(fs.size(), std::vector<double>(n, 0.0));
  std::vector<unsigned char> stopped(n, 0);
  std::vector<std::size_t> clips(block_count(n), 0), evals(block_count(n), 0);
  const auto status = run_paths(field, config, x, [&](std::size_t path, const StepView& v) {
    if (stopped[path]) return;
    if (stop_radius && v.states[0].norm() >= *stop_radius) {
      stopped[path] = 1;
      return;
    }
    if (v.h <= 0.0) return;
    const std::size_t b = path / kPathBlock;
    for (std::size_t j = 0; j < fs.size(); ++j) {
      s.integrals[j][path] += clipped(fs[j](v.t, v.states[0]), clips[b]) * v.h;
      ++evals[b];
    }
  });
  const auto total_clips = std::accumulate(clips.begin(), clips.end(), std::size_t{0});
  const auto total_evals = std::accumulate(evals.begin(), evals.end(), std::size_t{0});
  s.clip_fraction = total_evals ? static_cast<double>(total_clips) / static_cast<double>(total_evals) : 0.0;
  std::size_t exploded = 0;
  for (const auto& st : status) exploded += st.exploded ? 1 : 0;
  s.exploded_fraction = static_cast<double>(exploded) / static_cast<double>(n);
  return s;
}

OccupationEstimate occupation_integral(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                       const SpaceTimeFn& f) {
  const auto s = occupation_samples(problem.field, config, x, {f});
  const auto est = stats::mean(s.integrals[0]);
  OccupationEstimate out;
  out.value = est.value;
  out.std_error = est.std_error;
  out.n_paths = est.n;
  out.clip_fraction = s.clip_fraction;
  return out;
}

KhasminskiiReport khasminskii_check(const SdeProblem& problem, const SimulationConfig& config, const SpaceTimeFn& f,
                                    double R, const std::vector<Vec>& x_grid) {
  if (!(R > 0.0)) throw Error(ErrorCode::InvalidArgument, "khasminskii_check: R must be positive");
  if (x_grid.empty()) throw Error(ErrorCode::InvalidArgument, "khasminskii_check: empty x grid");
  for (const Vec& x : x_grid)
    if (x.norm() > R * (1.0 + 1e-12)) throw Error(ErrorCode::InvalidArgument, "khasminskii_check: grid point outside the ball");
  KhasminskiiReport rep;
  rep.R = R;
  const SpaceTimeFn localized = [&f, R](double t, const Vec& y) {
    if (y.norm() > R) return 0.0;
    const double v = f(t, y);
    if (v < 0.0) throw Error(ErrorCode::InvalidArgument, "khasminskii_check: integrand must be nonnegative");
    return v;
  };

  std::vector<std::vector<double>> integrals;
  bool exploded = false;
  rep.c = -1.0;
  for (const Vec& x : x_grid) {
    auto s = occupation_samples(problem.field, config, x, {localized});
    exploded = exploded || s.exploded_fraction > 0.0;
    KhasminskiiPoint pt;
    pt.x = x;
    const auto occ = stats::mean(s.integrals[0]);
    pt.occupation = occ.value;
    pt.occupation_se = occ.std_error;
    if (occ.value > rep.c) {
      rep.c = occ.value;
      rep.c_std_error = occ.std_error;
    }
    rep.points.push_back(pt);
    integrals.push_back(std::move(s.integrals[0]));
  }

  rep.applicable = rep.c + 3.0 * rep.c_std_error < 1.0;
  if (!rep.applicable) {
    rep.verdict = Verdict::Inconclusive;
    rep.note = "c + 3 SE >= 1; the exponential bound does not apply";
    return rep;
  }

  rep.pass = true;
  double worst = -std::numeric_limits<double>::infinity();
  bool heavy = false;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    KhasminskiiPoint& pt = rep.points[i];
    const auto& I = integrals[i];
    std::vector<double> e(I.size()), d(I.size());
    for (std::size_t k = 0; k < I.size(); ++k) {
      e[k] = std::exp(I[k]);
      d[k] = std::expm1(I[k]) - I[k] / (1.0 - rep.c);
    }
    const auto le = stats::mean(e);
    const auto de = stats::mean(d);
    pt.lhs = le.value;
    pt.lhs_se = le.std_error;
    pt.rhs = 1.0 + pt.occupation / (1.0 - rep.c);
    pt.diff = de.value;
    pt.diff_se = de.std_error;
    pt.tail_fraction = stats::top_share(e, 1e-3);
    pt.pass = de.value <= 3.0 * de.std_error + 1e-12 * pt.rhs;
    heavy = heavy || (pt.tail_fraction > 0.5 && le.std_error > 0.0);
    rep.pass = rep.pass && pt.pass;
    if (pt.lhs - pt.rhs > worst) {
      worst = pt.lhs - pt.rhs;
      rep.lhs = pt.lhs;
      rep.rhs = pt.rhs;
    }
  }
  if (exploded) {
    rep.verdict = Verdict::Inconclusive;
    rep.note = "exploded paths present";
  } else if (heavy) {
    rep.verdict = Verdict::Inconclusive;
    rep.note = "top 0.1% of paths carry more than half of the exponential estimate";
  } else {
    rep.verdict = rep.pass ? Verdict::Pass : Verdict::Fail;
  }
  return rep;
}

double lq_norm_on_box(const SpaceTimeFn& f, double q, int dim, const KrylovBox& box) {
  if (!(q >= 1.0)) throw Error(ErrorCode::InvalidArgument, "L^q norm needs q >= 1");
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::InvalidArgument, "L^q norm: bad dimension");
  const std::size_t m = std::max<std::size_t>(1, box.nodes_per_axis);
  const double ht = (box.t1 - box.t0) / static_cast<double>(m);
  const double hx = (box.hi - box.lo) / static_cast<double>(m);
  std::size_t cells = 1;
  for (int i = 0; i < dim; ++i) cells *= m;
  double acc = 0.0;
  Vec y(dim);
  for (std::size_t it = 0; it < m; ++it) {
    const double t = box.t0 + (static_cast<double>(it) + 0.5) * ht;
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t rest = c;
      for (int i = 0; i < dim; ++i) {
        y(i) = box.lo + (static_cast<double>(rest % m) + 0.5) * hx;
        rest /= m;
      }
      acc += std::pow(std::abs(f(t, y)), q);
    }
  }
  return std::pow(acc * ht * std::pow(hx, dim), 1.0 / q);
}

KrylovReport krylov_ratio(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                          const std::vector<KrylovMember>& family, double q, const KrylovBox& box) {
  if (family.empty()) throw Error(ErrorCode::InvalidArgument, "krylov_ratio: empty family");
  KrylovReport rep;
  rep.q = q;
  const int d = problem.field.dim;
  if (!(q > d + 1)) rep.warnings.push_back("q <= d+1: outside the integrability range of the estimate");
  std::vector<SpaceTimeFn> fs;
  for (const auto& m : family) fs.push_back(m.f);
  const auto samples = occupation_samples(problem.field, config, x, fs);
  if (samples.exploded_fraction > 0.0) rep.warnings.push_back("exploded paths present");
  for (std::size_t j = 0; j < family.size(); ++j) {
    KrylovRow row;
    row.name = family[j].name;
    const auto est = stats::mean(samples.integrals[j]);
    row.occupation = est.value;
    row.std_error = est.std_error;
    if (family[j].norm) {
      row.f_norm = *family[j].norm;
    } else {
      row.f_norm = lq_norm_on_box(family[j].f, q, d, box);
      row.norm_from_box = true;
    }
    row.ratio = row.f_norm > 0.0 ? row.occupation / row.f_norm : 0.0;
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  if (std::any_of(rep.rows.begin(), rep.rows.end(), [](const KrylovRow& r) { return r.norm_from_box; }))
    rep.warnings.push_back("norms computed on the stated box only");
  const double first = rep.rows.front().ratio, last = rep.rows.back().ratio;
  rep.bounded = std::isfinite(rep.max_ratio) && last <= 4.0 * first + 1e-15;
  rep.verdict = samples.exploded_fraction > 0.0 ? Verdict::Inconclusive : (rep.bounded ? Verdict::Pass : Verdict::Fail);
  return rep;
}

ExpOccupationReport exp_occupation_check(const SdeProblem& problem, const SimulationConfig& config,
                                         const std::vector<Vec>& x_grid, const SpaceTimeFn& f, double R0) {
  if (x_grid.empty()) throw Error(ErrorCode::InvalidArgument, "exp_occupation_check: empty x grid");
  ExpOccupationReport rep;
  rep.alpha = problem.growth ? problem.growth->alpha : 1.0;
  rep.R0 = R0;
  const SpaceTimeFn inner = [&f, R0](double t, const Vec& y) { return y.norm() <= R0 ? f(t, y) : 0.0; };
  const SpaceTimeFn outer = [&f, R0](double t, const Vec& y) { return y.norm() > R0 ? f(t, y) : 0.0; };
  bool inconclusive = false, cs_all = true;
  std::vector<double> u, lg;
  for (const Vec& x : x_grid) {
    const auto s = occupation_samples(problem.field, config, x, {inner, outer});
    const auto& a = s.integrals[0];
    const auto& b = s.integrals[1];
    const std::size_t n = a.size();
    std::vector<double> whole(n), e1(n), e2(n);
    for (std::size_t k = 0; k < n; ++k) {
      whole[k] = std::exp(a[k] + b[k]);
      e1[k] = std::exp(2.0 * b[k]);
      e2[k] = std::exp(2.0 * a[k]);
    }
    ExpOccupationPoint pt;
    pt.x = x;
    const auto est = stats::mean(whole);
    pt.report.estimate = est.value;
    pt.report.std_error = est.std_error;
    pt.report.n_paths = n;
    pt.report.time = config.horizon;
    pt.report.exploded_fraction = s.exploded_fraction;
    pt.report.tail_fraction = stats::top_share(whole, 1e-3);
    pt.I1 = stats::mean(e1).value;
    pt.I2 = stats::mean(e2).value;
    pt.cauchy_schwarz = est.value * est.value <= pt.I1 * pt.I2 * (1.0 + 1e-12);
    cs_all = cs_all && pt.cauchy_schwarz;
    if (s.exploded_fraction > 0.0 || (pt.report.tail_fraction > 0.5 && est.std_error > 0.0)) inconclusive = true;
    const double w = 1.0 + x.squaredNorm();
    u.push_back(rep.alpha > 0.0 ? std::pow(w, rep.alpha) : std::log(w));
    lg.push_back(std::log(est.value));
    rep.points.push_back(std::move(pt));
  }

  const std::size_t n = u.size();
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
  const double ml = std::accumulate(lg.begin(), lg.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (u[i] - mu) * (lg[i] - ml);
    sxx += (u[i] - mu) * (u[i] - mu);
  }
  rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  if (rep.alpha > 0.0) {
    rep.envelope_pass = rep.slope <= 1.0 + 1e-9;
    for (std::size_t i = 0; i < n; ++i) rep.envelope_C = std::max(rep.envelope_C, std::exp(lg[i] - u[i]));
  } else {
    rep.envelope_gamma = std::max(rep.slope, 0.0);
    rep.envelope_pass = true;
    for (std::size_t i = 0; i < n; ++i)
      rep.envelope_C = std::max(rep.envelope_C, std::exp(lg[i] - rep.envelope_gamma * u[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    MomentReport& r = rep.points[i].report;
    r.bound = rep.envelope_C * std::exp(rep.alpha > 0.0 ? u[i] : rep.envelope_gamma * u[i]);
    r.pass = r.estimate <= r.bound + 3.0 * r.std_error;
    r.verdict = inconclusive ? Verdict::Inconclusive : (r.pass ? Verdict::Pass : Verdict::Fail);
  }
  if (inconclusive) rep.verdict = Verdict::Inconclusive;
  else rep.verdict = (rep.envelope_pass && cs_all) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LocalOccupationReport local_exp_occupation_check(const SdeProblem& problem, const SimulationConfig& config,
                                                 const Vec& x, const SpaceTimeFn& f, double R,
                                                 std::size_t reference_paths) {
  if (!(x.norm() < R)) throw Error(ErrorCode::InvalidArgument, "local_exp_occupation_check: need |x| < R");
  LocalOccupationReport rep;
  rep.n_paths = config.n_paths;
  rep.reference_paths = reference_paths == 0 ? 2 * config.n_paths : std::max(reference_paths, config.n_paths);
  SimulationConfig ref = config;
  ref.n_paths = rep.reference_paths;
  const auto s = occupation_samples(problem.field, ref, x, {f}, R);
  std::vector<double> e(s.integrals[0].size());
  std::transform(s.integrals[0].begin(), s.integrals[0].end(), e.begin(), [](double v) { return std::exp(v); });
  const auto small = stats::mean(std::span<const double>(e.data(), config.n_paths));
  const auto full = stats::mean(e);
  rep.estimate = small.value;
  rep.std_error = small.std_error;
  rep.reference = full.value;
  rep.reference_se = full.std_error;
  rep.clip_fraction = s.clip_fraction;
  rep.tail_fraction = stats::top_share(e, 1e-3);
  const double pooled = std::sqrt(small.std_error * small.std_error + full.std_error * full.std_error);
  rep.stable = std::isfinite(full.value) && std::abs(small.value - full.value) <= 3.0 * pooled + 1e-12 * std::abs(full.value);
  if (rep.tail_fraction > 0.5 && full.std_error > 0.0) rep.verdict = Verdict::Inconclusive;
  else rep.verdict = rep.stable ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace flowlab
