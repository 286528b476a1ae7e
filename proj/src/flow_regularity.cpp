#include "flowlab/flow_regularity.hpp"

#include "flowlab/parallel.hpp"
#include "flowlab/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace flowlab {

namespace {

double lr_norm(const double* z, std::size_t n_times, std::size_t d, const std::vector<double>& times, double r) {
  auto mag = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += z[k * d + j] * z[k * d + j];
    return std::sqrt(s);
  };
  if (std::isinf(r)) {
    double m = 0.0;
    for (std::size_t k = 0; k < n_times; ++k) m = std::max(m, mag(k));
    return m;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n_times; ++k) acc += std::pow(mag(k), r) * (times[k + 1] - times[k]);
  return std::pow(acc, 1.0 / r);
}

// (E N^p)^{1/p} with a jackknife error; a constant sample is returned exactly.
stats::Estimate lp_moment(const std::vector<double>& norms, double p) {
  stats::Estimate e;
  e.n = norms.size();
  if (norms.empty()) return e;
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  if (*lo == *hi) {
    e.value = *lo;
    return e;
  }
  std::vector<double> powered(norms.size());
  std::transform(norms.begin(), norms.end(), powered.begin(), [p](double v) { return std::pow(v, p); });
  return stats::jackknife(powered, [p](double m) { return std::pow(m, 1.0 / p); });
}

}  // namespace

QuotientNorm quotient_norm(const PathEnsemble& e, std::size_t pair_index, double p, double r) {
  if (!e.coupling.synchronous()) throw Error(ErrorCode::InvalidArgument, "quotient_norm needs a coupled ensemble");
  if (pair_index >= e.coupling.starts.size()) throw Error(ErrorCode::InvalidArgument, "pair index out of range");
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "moment order p must be >= 1");
  if (!(r >= 1.0)) throw Error(ErrorCode::InvalidArgument, "time-norm order r must be >= 1");
  const std::size_t reps = e.coupling.pairs.size() / e.coupling.starts.size();
  const auto d = static_cast<std::size_t>(e.dim);
  QuotientNorm q;
  q.x = e.coupling.starts[pair_index].first;
  q.y = e.coupling.starts[pair_index].second;
  q.p = p;
  q.r = r;
  std::vector<double> norms;
  norms.reserve(reps);
  std::size_t excluded = 0;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const std::size_t b = pair_index * reps + rep;
    const auto [px, py] = e.coupling.pairs[b];
    if (e.status[px].terminated() || e.status[py].terminated()) {
      ++excluded;
      continue;
    }
    norms.push_back(lr_norm(e.coupling.pair_differences.data() + b * e.n_times() * d, e.n_times(), d, e.time_grid, r));
  }
  q.excluded_fraction = static_cast<double>(excluded) / static_cast<double>(reps);
  const auto est = lp_moment(norms, p);
  q.value = est.value;
  q.std_error = est.std_error;
  q.verdict = q.excluded_fraction > 0.01 ? Verdict::Inconclusive : Verdict::Pass;
  return q;
}

void fit_witness_values(SobolevWitness& w, int max_rounds) {
  const std::size_t n = w.base_grid.size();
  w.g.assign(n, 0.0);
  w.g_std_error.assign(n, 0.0);
  for (const auto& pq : w.pairs) {
    for (std::size_t v : {pq.i, pq.j}) {
      const double half = 0.5 * pq.quotient;
      if (half > w.g[v]) {
        w.g[v] = half;
        w.g_std_error[v] = 0.5 * pq.std_error;
      }
    }
  }
  w.converged = false;
  w.rounds = 0;
  for (int round = 0; round < max_rounds; ++round) {
    bool changed = false;
    for (const auto& pq : w.pairs) {
      const double need_i = pq.quotient - w.g[pq.j];
      if (need_i > w.g[pq.i]) {
        w.g[pq.i] = need_i;
        w.g_std_error[pq.i] = pq.std_error + w.g_std_error[pq.j];
        changed = true;
      }
      const double need_j = pq.quotient - w.g[pq.i];
      if (need_j > w.g[pq.j]) {
        w.g[pq.j] = need_j;
        w.g_std_error[pq.j] = pq.std_error + w.g_std_error[pq.i];
        changed = true;
      }
    }
    w.rounds = round + 1;
    if (!changed) {
      w.converged = true;
      break;
    }
  }
  w.max_violation = 0.0;
  for (std::size_t k = 0; k < w.pairs.size(); ++k) {
    const auto& pq = w.pairs[k];
    const double denom = w.g[pq.i] + w.g[pq.j];
    const double v = denom > 0.0 ? pq.quotient / denom : (pq.quotient > 0.0 ? kInfNorm : 0.0);
    if (v > w.max_violation) {
      w.max_violation = v;
      w.worst_pair = k;
    }
  }
}

void fit_envelope(SobolevWitness& w, double alpha) {
  w.alpha = alpha;
  const std::size_t n = w.base_grid.size();
  std::vector<double> u(n), lg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 + w.base_grid[i].squaredNorm();
    u[i] = alpha > 0.0 ? std::pow(s, alpha) : std::log(s);
    lg[i] = std::log(std::max(w.g[i], 1e-300));
  }
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
  const double ml = std::accumulate(lg.begin(), lg.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (u[i] - mu) * (lg[i] - ml);
    sxx += (u[i] - mu) * (u[i] - mu);
  }
  w.envelope_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  if (alpha > 0.0) {
    w.envelope_gamma = 0.0;
    w.envelope_C = 0.0;
    for (std::size_t i = 0; i < n; ++i) w.envelope_C = std::max(w.envelope_C, w.g[i] * std::exp(-u[i]));
    w.envelope_pass = w.envelope_slope <= 1.0 + 1e-9;
  } else {
    w.envelope_gamma = std::max(w.envelope_slope, 0.0);
    w.envelope_C = 0.0;
    for (std::size_t i = 0; i < n; ++i) w.envelope_C = std::max(w.envelope_C, w.g[i] * std::exp(-w.envelope_gamma * u[i]));
    w.envelope_pass = true;
  }
}

SobolevWitness witness_fit(const SdeProblem& problem, const SimulationConfig& config, const std::vector<Vec>& base_grid,
                           double p, double r) {
  if (base_grid.size() < 3) throw Error(ErrorCode::InvalidArgument, "witness_fit needs at least 3 grid points");
  SobolevWitness w;
  w.base_grid = base_grid;
  w.p = p;
  w.r = r;
  std::vector<std::pair<Vec, Vec>> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t i = 0; i < base_grid.size(); ++i)
    for (std::size_t j = i + 1; j < base_grid.size(); ++j) {
      if ((base_grid[i] - base_grid[j]).squaredNorm() == 0.0)
        throw Error(ErrorCode::InvalidArgument, "witness_fit: duplicate grid points");
      pairs.emplace_back(base_grid[i], base_grid[j]);
      index.emplace_back(i, j);
    }
  const PathEnsemble e = coupled_simulate(problem, config, pairs);
  double excluded = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const QuotientNorm qn = quotient_norm(e, k, p, r);
    PairQuotient pq;
    pq.i = index[k].first;
    pq.j = index[k].second;
    pq.distance = (pairs[k].first - pairs[k].second).norm();
    pq.quotient = qn.value / pq.distance;
    pq.std_error = qn.std_error / pq.distance;
    w.pairs.push_back(pq);
    excluded = std::max(excluded, qn.excluded_fraction);
  }
  w.excluded_fraction = excluded;
  fit_witness_values(w);
  fit_envelope(w, problem.growth ? problem.growth->alpha : 1.0);
  if (w.excluded_fraction > 0.01) w.verdict = Verdict::Inconclusive;
  else if (w.converged && w.max_violation <= 1.0 + 1e-12 && w.envelope_pass) w.verdict = Verdict::Pass;
  else w.verdict = Verdict::Fail;
  return w;
}

const char* to_string(GradientVariant v) {
  return v == GradientVariant::SupOfExpectation ? "sup-of-expectation" : "expectation-of-sup";
}

GradientVariant gradient_variant_from_string(const std::string& name) {
  if (name == "sup-of-expectation") return GradientVariant::SupOfExpectation;
  if (name == "expectation-of-sup") return GradientVariant::ExpectationOfSup;
  throw Error(ErrorCode::InvalidConfig, "unknown gradient variant '" + name + "'");
}

GradientResult fd_gradient(const SdeProblem& problem, const SimulationConfig& config, const Vec& x, double h, double p,
                           GradientVariant variant, double envelope_C, double envelope_gamma) {
  const int d = problem.field.dim;
  if (x.size() != d) throw Error(ErrorCode::InvalidArgument, "fd_gradient: start point dimension mismatch");
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "fd_gradient: h must be positive");
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "fd_gradient: p must be >= 1");
  // Members: base, then (+h, -h, +h/2, -h/2) per coordinate.
  std::vector<Vec> starts{x};
  for (int i = 0; i < d; ++i)
    for (double s : {h, -h, 0.5 * h, -0.5 * h}) {
      Vec v = x;
      v(i) += s;
      starts.push_back(v);
    }
  const TimeGrid grid(config.dt, config.horizon);
  const std::size_t steps = grid.steps();
  const std::size_t stride = std::max<std::size_t>(config.record_stride, std::max<std::size_t>(1, steps / 200));
  std::vector<std::size_t> sample_steps;
  for (std::size_t k = 0; k < steps; k += stride) sample_steps.push_back(k);
  sample_steps.push_back(steps);
  const std::size_t n_s = sample_steps.size();
  const std::size_t blocks = block_count(config.n_paths);
  const auto dd = static_cast<std::size_t>(d * d);

  // Per-block sums, merged in block order.
  struct Acc {
    std::vector<double> jac, mom, mom2, mom_half;
  };
  std::vector<Acc> acc(blocks);
  for (auto& a : acc) {
    a.jac.assign(n_s * dd, 0.0);
    a.mom.assign(n_s, 0.0);
    a.mom2.assign(n_s, 0.0);
    a.mom_half.assign(n_s, 0.0);
  }
  std::vector<double> run_sup(config.n_paths, 0.0), run_sup_half(config.n_paths, 0.0);

  auto jacobian = [&](const StepView& v, bool half_step) {
    Mat J(d, d);
    for (int i = 0; i < d; ++i) {
      const std::size_t plus = 1 + 4 * static_cast<std::size_t>(i) + (half_step ? 2 : 0);
      const std::size_t minus = plus + 1;
      const double width = starts[plus](i) - starts[minus](i);
      J.col(i) = (v.offsets[plus] - v.offsets[minus]) / width;
    }
    return J;
  };

  const auto status = run_bundles(problem.field, config, starts, [&](std::size_t path, const StepView& v) {
    const Mat J = jacobian(v, false);
    const Mat Jh = jacobian(v, true);
    const double m = std::pow(J.norm(), p);
    const double mh = std::pow(Jh.norm(), p);
    run_sup[path] = std::max(run_sup[path], m);
    run_sup_half[path] = std::max(run_sup_half[path], mh);
    const auto it = std::lower_bound(sample_steps.begin(), sample_steps.end(), v.step);
    if (it == sample_steps.end() || *it != v.step) return;
    const auto k = static_cast<std::size_t>(it - sample_steps.begin());
    Acc& a = acc[path / kPathBlock];
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a.jac[k * dd + static_cast<std::size_t>(r * d + c)] += J(r, c);
    a.mom[k] += m;
    a.mom2[k] += m * m;
    a.mom_half[k] += mh;
  });

  GradientResult res;
  FlowDerivativeEstimate& est = res.estimate;
  est.x = x;
  est.h = h;
  est.p = p;
  est.variant = variant;
  const auto n = static_cast<double>(config.n_paths);
  std::vector<double> jac(n_s * dd, 0.0), mom(n_s, 0.0), mom2(n_s, 0.0), mom_half(n_s, 0.0);
  for (const auto& a : acc) {
    for (std::size_t i = 0; i < jac.size(); ++i) jac[i] += a.jac[i];
    for (std::size_t k = 0; k < n_s; ++k) {
      mom[k] += a.mom[k];
      mom2[k] += a.mom2[k];
      mom_half[k] += a.mom_half[k];
    }
  }
  double sup_half = 0.0;
  for (std::size_t k = 0; k < n_s; ++k) {
    est.times.push_back(grid.time(sample_steps[k]));
    std::vector<double> mj(dd);
    for (std::size_t i = 0; i < dd; ++i) mj[i] = jac[k * dd + i] / n;
    est.mean_jacobian.push_back(std::move(mj));
    const double mean = mom[k] / n;
    est.moment.push_back(mean);
    const double var = n > 1 ? std::max(0.0, (mom2[k] / n - mean * mean) * n / (n - 1.0)) : 0.0;
    est.moment_std_error.push_back(std::sqrt(var / n));
    est.sup_of_expectation = std::max(est.sup_of_expectation, mean);
    sup_half = std::max(sup_half, mom_half[k] / n);
  }
  const auto es = stats::mean(run_sup);
  est.expectation_of_sup = es.value;
  est.expectation_of_sup_se = es.std_error;
  const double es_half = stats::mean(run_sup_half).value;

  const bool sup_exp = variant == GradientVariant::SupOfExpectation;
  const double value = sup_exp ? est.sup_of_expectation : est.expectation_of_sup;
  est.half_step_value = sup_exp ? sup_half : es_half;
  est.step_size_warning = std::abs(value - est.half_step_value) > 0.2 * std::abs(value);

  std::size_t exploded = 0;
  for (const auto& st : status) exploded += st.terminated() ? 1 : 0;
  est.exploded_fraction = static_cast<double>(exploded) / (n * static_cast<double>(starts.size()));

  MomentReport& r = res.report;
  r.time = grid.horizon();
  r.estimate = value;
  if (sup_exp) {
    const auto k = static_cast<std::size_t>(std::max_element(est.moment.begin(), est.moment.end()) - est.moment.begin());
    r.std_error = est.moment_std_error[k];
  } else {
    r.std_error = est.expectation_of_sup_se;
  }
  const double alpha = problem.growth ? problem.growth->alpha : 1.0;
  const double s = 1.0 + x.squaredNorm();
  r.bound = envelope_C * (alpha > 0.0 ? std::exp(std::pow(s, alpha)) : std::pow(s, envelope_gamma));
  r.n_paths = config.n_paths;
  r.exploded_fraction = est.exploded_fraction;
  r.bias = std::abs(value - est.half_step_value);
  r.pass = r.estimate <= r.bound + 3.0 * r.std_error + r.bias;
  if (r.exploded_fraction > 0.0) {
    r.verdict = Verdict::Inconclusive;
    r.note = "frozen bundle members present";
  } else {
    r.verdict = r.pass ? Verdict::Pass : Verdict::Fail;
    if (est.step_size_warning) r.note = "estimate moves more than 20% between h and h/2";
    if (!sup_exp) r.note += std::string(r.note.empty() ? "" : "; ") + "grid sup is a lower bound of the path sup";
  }
  return res;
}

std::size_t Lattice::size() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

Vec Lattice::point(std::size_t flat) const {
  const int d = dim();
  Vec x(d);
  for (int i = d - 1; i >= 0; --i) {
    const std::size_t s = shape[static_cast<std::size_t>(i)];
    x(i) = origin(i) + spacing * static_cast<double>(flat % s);
    flat /= s;
  }
  return x;
}

namespace {

void check_lattice(const Lattice& lattice) {
  if (lattice.shape.empty() || lattice.dim() > kMaxDim) throw Error(ErrorCode::InvalidArgument, "lattice: bad dimension");
  if (lattice.origin.size() != lattice.dim()) throw Error(ErrorCode::InvalidArgument, "lattice: origin dimension mismatch");
  if (!(lattice.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "lattice: spacing must be positive");
  for (std::size_t s : lattice.shape)
    if (s == 0) throw Error(ErrorCode::InvalidArgument, "lattice: empty axis");
}

}  // namespace

std::vector<double> maximal_function(std::span<const double> values, const Lattice& lattice, double R) {
  check_lattice(lattice);
  if (values.size() != lattice.size()) throw Error(ErrorCode::InvalidArgument, "maximal_function: size mismatch");
  if (R < lattice.spacing) throw Error(ErrorCode::InvalidArgument, "maximal_function: R below the lattice spacing");
  const int d = lattice.dim();
  const auto K = static_cast<long>(std::floor(R / lattice.spacing + 1e-9));

  // Integer offsets within the radius, ordered by squared length.
  struct Offset {
    std::array<long, kMaxDim> o{};
    long r2 = 0;
  };
  std::vector<Offset> offsets;
  std::array<long, kMaxDim> cur{};
  std::function<void(int)> build = [&](int axis) {
    if (axis == d) {
      Offset off;
      off.o = cur;
      for (int i = 0; i < d; ++i) off.r2 += cur[static_cast<std::size_t>(i)] * cur[static_cast<std::size_t>(i)];
      if (off.r2 <= K * K) offsets.push_back(off);
      return;
    }
    for (long v = -K; v <= K; ++v) {
      cur[static_cast<std::size_t>(axis)] = v;
      build(axis + 1);
    }
  };
  build(0);
  std::stable_sort(offsets.begin(), offsets.end(), [](const Offset& a, const Offset& b) { return a.r2 < b.r2; });

  std::vector<std::size_t> strides(static_cast<std::size_t>(d));
  std::size_t acc = 1;
  for (int i = d - 1; i >= 0; --i) {
    strides[static_cast<std::size_t>(i)] = acc;
    acc *= lattice.shape[static_cast<std::size_t>(i)];
  }

  std::vector<double> out(values.size(), 0.0);
  parallel::for_each_index(values.size(), [&](std::size_t node) {
    std::array<long, kMaxDim> pos{};
    std::size_t rest = node;
    for (int i = 0; i < d; ++i) {
      const auto si = static_cast<std::size_t>(i);
      pos[si] = static_cast<long>(rest / strides[si]);
      rest %= strides[si];
    }
    double sum = 0.0, best = 0.0;
    std::size_t count = 0;
    long next_k = 0;  // next admissible radius index
    for (std::size_t idx = 0; idx < offsets.size(); ++idx) {
      const Offset& off = offsets[idx];
      // Close every radius k*h whose ball is now complete.
      while (next_k <= K && off.r2 > next_k * next_k) {
        if (count > 0) best = std::max(best, sum / static_cast<double>(count));
        ++next_k;
      }
      std::size_t flat = 0;
      bool inside = true;
      for (int i = 0; i < d && inside; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const long c = pos[si] + off.o[si];
        inside = c >= 0 && c < static_cast<long>(lattice.shape[si]);
        flat += static_cast<std::size_t>(c) * strides[si];
      }
      if (!inside) continue;
      sum += std::abs(values[flat]);
      ++count;
    }
    if (count > 0) best = std::max(best, sum / static_cast<double>(count));
    out[node] = best;
  });
  return out;
}

MaximalCheck maximal_inequality_check(const std::function<double(const Vec&)>& f,
                                      const std::function<double(const Vec&)>& grad_norm, const Lattice& lattice,
                                      double R) {
  check_lattice(lattice);
  const std::size_t n = lattice.size();
  std::vector<Vec> pts(n);
  std::vector<double> fv(n), gv(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = lattice.point(i);
    fv[i] = f(pts[i]);
    gv[i] = grad_norm(pts[i]);
  }
  const std::vector<double> M = maximal_function(gv, lattice, R);
  const double scale = std::pow(2.0, lattice.dim());
  MaximalCheck c;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = (pts[i] - pts[j]).norm();
      if (dist > R * (1.0 + 1e-12)) continue;
      ++c.pairs_checked;
      const double lhs = std::abs(fv[i] - fv[j]);
      const double rhs = scale * dist * (M[i] + M[j]);
      const double tol = 1e-12 * std::max(1.0, rhs);
      if (lhs > rhs + tol) ++c.violations;
      if (rhs > 0.0) c.worst_ratio = std::max(c.worst_ratio, lhs / rhs);
      else if (lhs > 0.0) c.worst_ratio = kInfNorm;
    }
  }
  return c;
}

}  // namespace flowlab
