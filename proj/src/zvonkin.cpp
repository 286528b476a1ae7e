#include "flowlab/zvonkin.hpp"

#include "flowlab/parallel.hpp"
#include "flowlab/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace flowlab {

namespace {

double smoothstep(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }
double smoothstep_d1(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }
double smoothstep_d2(double s) { return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s); }

}  // namespace

double Cutoff::value(double x) const {
  const double s = (std::abs(x) - R) / R;
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  return 1.0 - smoothstep(s);
}

double Cutoff::d1(double x) const {
  const double s = (std::abs(x) - R) / R;
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return -smoothstep_d1(s) / R * (x < 0.0 ? -1.0 : 1.0);
}

double Cutoff::d2(double x) const {
  const double s = (std::abs(x) - R) / R;
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return -smoothstep_d2(s) / (R * R);
}

DriftSplit split_drift(const SdeProblem& problem, double R0) {
  if (problem.field.dim != 1 || problem.field.noise_dim != 1)
    throw Error(ErrorCode::InvalidArgument, "split_drift: only one-dimensional problems are supported");
  if (!(R0 >= 4.0)) throw Error(ErrorCode::InvalidArgument, "split_drift: R0 must be >= 4");
  DriftSplit s;
  s.R0 = R0;
  s.chi = Cutoff{R0};
  const auto drift = problem.field.drift;
  const Cutoff chi = s.chi;
  s.b1 = [drift, chi](double t, double x) { return drift(t, scalar_vec(x))(0) * chi.value(x); };
  const auto b1 = s.b1;
  s.b2 = [drift, b1](double t, double x) { return drift(t, scalar_vec(x))(0) - b1(t, x); };

  const std::size_t n = 4001;
  const double L = 4.0 * R0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -L + 2.0 * L * static_cast<double>(i) / static_cast<double>(n - 1);
    s.grad_chi_sup = std::max(s.grad_chi_sup, std::abs(chi.d1(x)));
    const double b = drift(0.0, scalar_vec(x))(0);
    s.reconstruction_error = std::max(s.reconstruction_error, std::abs(s.b1(0.0, x) + s.b2(0.0, x) - b) / (1.0 + std::abs(b)));
  }
  s.grad_chi_ok = s.grad_chi_sup <= 0.5;
  return s;
}

GridTable::GridTable(double x0, double dx, std::size_t nx, std::vector<double> times)
    : x0_(x0), dx_(dx), nx_(nx), times_(std::move(times)), data_(nx * times_.size(), 0.0) {
  if (nx < 4 || times_.empty() || !(dx > 0.0)) throw Error(ErrorCode::InvalidArgument, "GridTable: degenerate grid");
}

namespace {

struct Cubic {
  double p0, p1, p2, p3;
  double value(double s) const {
    return 0.5 * (2.0 * p1 + (-p0 + p2) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s);
  }
  double slope(double s) const {
    return 0.5 * ((-p0 + p2) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s +
                  3.0 * (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s);
  }
};

}  // namespace

double GridTable::eval_slice(std::size_t n, double x) const {
  const double p = (x - x0_) / dx_;
  if (!(p >= 0.0) || p > static_cast<double>(nx_ - 1)) return 0.0;
  auto i = static_cast<std::size_t>(p);
  if (i >= nx_ - 1) i = nx_ - 2;
  const double s = p - static_cast<double>(i);
  const double* row = data_.data() + n * nx_;
  const double p1 = row[i], p2 = row[i + 1];
  const double p0 = i > 0 ? row[i - 1] : 2.0 * p1 - p2;
  const double p3 = i + 2 < nx_ ? row[i + 2] : 2.0 * p2 - p1;
  return Cubic{p0, p1, p2, p3}.value(s);
}

namespace {

// Bracketing slice and linear weight for time t.
std::pair<std::size_t, double> time_weight(const std::vector<double>& times, double t) {
  if (times.size() == 1 || t <= times.front()) return {0, 0.0};
  if (t >= times.back()) return {times.size() - 2, 1.0};
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto n = static_cast<std::size_t>(it - times.begin()) - 1;
  return {n, (t - times[n]) / (times[n + 1] - times[n])};
}

}  // namespace

double GridTable::eval(double t, double x) const {
  const auto [n, w] = time_weight(times_, t);
  if (times_.size() == 1) return eval_slice(0, x);
  const double a = eval_slice(n, x);
  if (w == 0.0) return a;
  return (1.0 - w) * a + w * eval_slice(n + 1, x);
}

double GridTable::eval_dx(double t, double x) const {
  auto slope = [&](std::size_t n) {
    const double p = (x - x0_) / dx_;
    if (!(p >= 0.0) || p > static_cast<double>(nx_ - 1)) return 0.0;
    auto i = static_cast<std::size_t>(p);
    if (i >= nx_ - 1) i = nx_ - 2;
    const double s = p - static_cast<double>(i);
    const double* row = data_.data() + n * nx_;
    const double p1 = row[i], p2 = row[i + 1];
    const double p0 = i > 0 ? row[i - 1] : 2.0 * p1 - p2;
    const double p3 = i + 2 < nx_ ? row[i + 2] : 2.0 * p2 - p1;
    return Cubic{p0, p1, p2, p3}.slope(s) / dx_;
  };
  const auto [n, w] = time_weight(times_, t);
  if (times_.size() == 1) return slope(0);
  const double a = slope(n);
  if (w == 0.0) return a;
  return (1.0 - w) * a + w * slope(n + 1);
}

PdeSolution solve_backward_pde_fixed(const std::function<double(double, double)>& b1,
                                     const std::function<double(double, double)>& a, double lambda, double R0,
                                     const PdeOptions& opt) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "PDE: lambda must be positive");
  if (opt.nx < 5 || opt.nt < 1) throw Error(ErrorCode::InvalidArgument, "PDE: grid too small");
  if (!(opt.horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "PDE: horizon must be positive");
  const double L = opt.half_width > 0.0 ? opt.half_width : 6.0 * R0;
  const std::size_t nx = opt.nx, nt = opt.nt;
  const double dx = 2.0 * L / static_cast<double>(nx - 1);
  const double dt = opt.horizon / static_cast<double>(nt);
  std::vector<double> times(nt + 1);
  for (std::size_t n = 0; n < nt; ++n) times[n] = static_cast<double>(n) * dt;
  times[nt] = opt.horizon;

  PdeSolution sol;
  sol.lambda = lambda;
  sol.R0 = R0;
  sol.boundary_margin = L - 2.0 * R0;
  sol.u = GridTable(-L, dx, nx, times);

  std::vector<double> lo(nx), di(nx), up(nx), rhs(nx), cp(nx), dp(nx);
  for (std::size_t step = nt; step-- > 0;) {
    const double t = times[step];
    const double h = times[step + 1] - times[step];
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double x = sol.u.x(i);
      const double ai = a(t, x);
      if (!(ai > 0.0)) throw Error(ErrorCode::InvalidArgument, "PDE: diffusion is not elliptic at x = " + std::to_string(x));
      const double bi = b1(t, x);
      const double diff = 0.5 * ai / (dx * dx);
      const double adv = bi / (2.0 * dx);
      lo[i] = -h * (diff - adv);
      di[i] = 1.0 + h * (2.0 * diff + lambda);
      up[i] = -h * (diff + adv);
      rhs[i] = sol.u.at(step + 1, i) + h * bi;
    }
    // Thomas sweep on the interior with u = 0 at both ends.
    cp[1] = up[1] / di[1];
    dp[1] = rhs[1] / di[1];
    for (std::size_t i = 2; i + 1 < nx; ++i) {
      const double m = di[i] - lo[i] * cp[i - 1];
      cp[i] = up[i] / m;
      dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / m;
    }
    sol.u.at(step, nx - 2) = dp[nx - 2];
    for (std::size_t i = nx - 2; i-- > 1;) sol.u.at(step, i) = dp[i] - cp[i] * sol.u.at(step, i + 1);
  }

  for (std::size_t n = 0; n <= nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) sol.sup_u = std::max(sol.sup_u, std::abs(sol.u.at(n, i)));
    for (std::size_t i = 1; i + 1 < nx; ++i)
      sol.sup_du = std::max(sol.sup_du, std::abs(sol.u.at(n, i + 1) - sol.u.at(n, i - 1)) / (2.0 * dx));
  }
  sol.accepted = sol.sup_u + sol.sup_du <= 0.5;
  sol.trace.push_back({lambda, sol.sup_u, sol.sup_du});
  return sol;
}

PdeSolution solve_backward_pde(const std::function<double(double, double)>& b1,
                               const std::function<double(double, double)>& a, double R0, const PdeOptions& options) {
  std::vector<LambdaAttempt> trace;
  double lambda = options.lambda0;
  PdeSolution sol;
  for (int k = 0; k <= options.max_doublings; ++k, lambda *= 2.0) {
    sol = solve_backward_pde_fixed(b1, a, lambda, R0, options);
    trace.push_back(sol.trace.back());
    if (sol.accepted) break;
  }
  sol.trace = std::move(trace);
  return sol;
}

ZvonkinTransform::ZvonkinTransform(const SdeProblem& problem, const DriftSplit& split, PdeSolution solution)
    : problem_(problem), split_(split), solution_(std::move(solution)), chi2_{2.0 * split.R0}, R1_(4.0 * split.R0) {
  if (problem.field.dim != 1) throw Error(ErrorCode::InvalidArgument, "Zvonkin transform: one-dimensional only");
  if (!solution_.accepted)
    throw Error(ErrorCode::SolverFailure, "Zvonkin transform: PDE solution did not reach sup|u| + sup|u'| <= 1/2");
  const GridTable& u = solution_.u;
  if (u.x0() > -R1_ - 2.0 * u.dx())
    throw Error(ErrorCode::InvalidArgument, "Zvonkin transform: PDE box must extend beyond 4 R0");

  // The cancelled terms b1 chi' and b1 (1 - chi_{2R0}) must vanish identically.
  for (std::size_t i = 0; i < u.nx(); ++i) {
    const double x = u.x(i);
    const double b1 = split_.b1(0.0, x);
    if (b1 * chi2_.d1(x) != 0.0 || b1 * (1.0 - chi2_.value(x)) != 0.0)
      throw Error(ErrorCode::SolverFailure, "Zvonkin transform: support of b1 meets the gradient of chi_{2R0}");
  }

  const auto& times = u.times();
  const std::size_t nt = times.size();
  const double lambda = solution_.lambda;
  identity_ = std::all_of(u.data().begin(), u.data().end(), [](double v) { return v == 0.0; });

  // Sandwich on adjacent nodes bounds every chord slope over the grid.
  sandwich_.min_slope = std::numeric_limits<double>::infinity();
  sandwich_.max_slope = -std::numeric_limits<double>::infinity();
  double worst = -1.0;
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t i = 0; i + 1 < u.nx(); ++i) {
      const double x0 = u.x(i), x1 = u.x(i + 1);
      const double p0 = x0 + u.at(n, i) * chi2_.value(x0);
      const double p1 = x1 + u.at(n, i + 1) * chi2_.value(x1);
      const double slope = (p1 - p0) / (x1 - x0);
      sandwich_.min_slope = std::min(sandwich_.min_slope, slope);
      sandwich_.max_slope = std::max(sandwich_.max_slope, slope);
      const double excess = std::max(0.5 - slope, slope - 1.5);
      if (excess > worst) {
        worst = excess;
        sandwich_.worst_x = x0;
        sandwich_.worst_y = x1;
        sandwich_.worst_t = times[n];
      }
    }
  }
  sandwich_.pass = sandwich_.min_slope >= 0.5 && sandwich_.max_slope <= 1.5;
  if (!sandwich_.pass)
    throw Error(ErrorCode::SolverFailure, "Zvonkin transform: bi-Lipschitz sandwich violated between x = " +
                                              std::to_string(sandwich_.worst_x) + " and " +
                                              std::to_string(sandwich_.worst_y));

  // Tables on the nodes inside |x| <= R1.
  std::size_t i_lo = 0;
  while (u.x(i_lo) < -R1_) ++i_lo;
  std::size_t i_hi = u.nx() - 1;
  while (u.x(i_hi) > R1_) --i_hi;
  const std::size_t m = i_hi - i_lo + 1;
  phi_inv_ = std::make_shared<GridTable>(u.x(i_lo), u.dx(), m, times);
  sigma_t_ = std::make_shared<GridTable>(u.x(i_lo), u.dx(), m, times);
  b_t_ = std::make_shared<GridTable>(u.x(i_lo), u.dx(), m, times);

  parallel::for_each_index(nt, [&](std::size_t n) {
    const double t = times[n];
    auto phi_n = [&](double x) { return x + u.eval_slice(n, x) * chi2_.value(x); };
    std::size_t k = 0;  // bracket cursor over the full u grid
    for (std::size_t j = 0; j < m; ++j) {
      const double y = u.x(i_lo + j);
      while (k + 2 < u.nx() && phi_n(u.x(k + 1)) <= y) ++k;
      double a = u.x(k), b = u.x(k + 1);
      double x = a + (b - a) * 0.5;
      for (int it = 0; it < 100; ++it) {
        const double g = phi_n(x) - y;
        if (g == 0.0) break;
        if (g < 0.0) a = x;
        else b = x;
        const double d = 1.0 + (u.eval_slice(n, x + 1e-7) - u.eval_slice(n, x - 1e-7)) / 2e-7 * chi2_.value(x) +
                         u.eval_slice(n, x) * chi2_.d1(x);
        double next = x - g / d;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) {
          x = next;
          break;
        }
        x = next;
      }
      phi_inv_->at(n, j) = x;

      const double uv = u.eval_slice(n, x);
      const double ud = [&] {
        // Derivative of the same cubic used for u.
        const double p = (x - u.x0()) / u.dx();
        auto i = static_cast<std::size_t>(p);
        if (i >= u.nx() - 1) i = u.nx() - 2;
        const double s = p - static_cast<double>(i);
        const double p1 = u.at(n, i), p2 = u.at(n, i + 1);
        const double p0 = i > 0 ? u.at(n, i - 1) : 2.0 * p1 - p2;
        const double p3 = i + 2 < u.nx() ? u.at(n, i + 2) : 2.0 * p2 - p1;
        return Cubic{p0, p1, p2, p3}.slope(s) / u.dx();
      }();
      const double c = chi2_.value(x), c1 = chi2_.d1(x), c2 = chi2_.d2(x);
      const double sig = problem_.field.sigma(t, scalar_vec(x))(0, 0);
      const double aa = sig * sig;
      const double dphi = 1.0 + ud * c + uv * c1;
      const double hv = aa * ud * c1 + 0.5 * aa * uv * c2 + lambda * uv * c;
      sigma_t_->at(n, j) = dphi * sig;
      b_t_->at(n, j) = hv + split_.b2(t, x) * dphi;
    }
  });

  // Round trip at cell midpoints on every tenth slice.
  for (std::size_t n = 0; n < nt; n += std::max<std::size_t>(1, nt / 10)) {
    for (std::size_t j = 0; j + 1 < m; ++j) {
      const double y = u.x(i_lo + j) + 0.5 * u.dx();
      const double x = phi_inv_->eval_slice(n, y);
      inverse_error_ = std::max(inverse_error_, std::abs(x + u.eval_slice(n, x) * chi2_.value(x) - y));
    }
  }
}

double ZvonkinTransform::u_cut(double t, double x) const {
  return solution_.u.eval(t, x) * chi2_.value(x);
}

double ZvonkinTransform::phi(double t, double x) const {
  if (identity_ || std::abs(x) >= R1_) return x;
  return x + u_cut(t, x);
}

double ZvonkinTransform::phi_dx(double t, double x) const {
  if (identity_ || std::abs(x) >= R1_) return 1.0;
  return 1.0 + solution_.u.eval_dx(t, x) * chi2_.value(x) + solution_.u.eval(t, x) * chi2_.d1(x);
}

double ZvonkinTransform::phi_inv(double t, double y) const {
  if (identity_ || std::abs(y) >= R1_) return y;
  return phi_inv_->eval(t, y);
}

double ZvonkinTransform::h(double t, double x) const {
  if (identity_ || std::abs(x) >= R1_) return 0.0;
  const double uv = solution_.u.eval(t, x), ud = solution_.u.eval_dx(t, x);
  const double sig = problem_.field.sigma(t, scalar_vec(x))(0, 0);
  const double aa = sig * sig;
  return aa * ud * chi2_.d1(x) + 0.5 * aa * uv * chi2_.d2(x) + solution_.lambda * uv * chi2_.value(x);
}

double ZvonkinTransform::sigma_tilde(double t, double y) const {
  if (identity_ || std::abs(y) >= R1_) return problem_.field.sigma(t, scalar_vec(y))(0, 0);
  return sigma_t_->eval(t, y);
}

double ZvonkinTransform::b_tilde(double t, double y) const {
  if (std::abs(y) >= R1_) return problem_.field.b(t, scalar_vec(y))(0);
  if (identity_) return split_.b2(t, y);
  return b_t_->eval(t, y);
}

SdeProblem ZvonkinTransform::transformed_problem() const {
  SdeProblem p;
  p.field.dim = 1;
  p.field.noise_dim = 1;
  // Tables are shared, so copies of the transformed field stay cheap.
  auto self = std::make_shared<ZvonkinTransform>(*this);
  p.field.drift = [self](double t, const Vec& y) { return scalar_vec(self->b_tilde(t, y(0))); };
  p.field.diffusion = [self](double t, const Vec& y) {
    Mat s(1, 1);
    s(0, 0) = self->sigma_tilde(t, y(0));
    return s;
  };
  p.preset_id = problem_.preset_id + "~zvonkin";
  p.description = "Zvonkin transform of " + problem_.preset_id;
  return p;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return i + 1 < v.size() ? (1.0 - w) * v[i] + w * v[i + 1] : v[i];
}

}  // namespace

ConjugacyReport conjugacy_check(const SdeProblem& problem, const ZvonkinTransform& transform,
                                const SimulationConfig& config, double x) {
  config.validate();
  const SdeProblem tp = transform.transformed_problem();
  const BundleIntegrator ix(problem.field, config);
  const BundleIntegrator iy(tp.field, config);
  const std::size_t n = config.n_paths;
  const std::size_t steps = ix.grid().steps();
  std::vector<double> err(n, 0.0);
  std::vector<unsigned char> excluded(n, 0);
  const Vec x0 = scalar_vec(x);
  const Vec y0 = scalar_vec(transform.phi(0.0, x));
  parallel::for_each_index(block_count(n), [&](std::size_t block) {
    std::vector<double> xs(steps + 1);
    const std::size_t begin = block * kPathBlock, end = std::min(n, begin + kPathBlock);
    for (std::size_t path = begin; path < end; ++path) {
      const std::uint64_t stream = config.stream_offset + path;
      const auto sx = ix.run(std::span<const Vec>(&x0, 1), stream, [&](const StepView& v) { xs[v.step] = v.states[0](0); });
      double worst = 0.0;
      const auto sy = iy.run(std::span<const Vec>(&y0, 1), stream, [&](const StepView& v) {
        worst = std::max(worst, std::abs(v.states[0](0) - transform.phi(v.t, xs[v.step])));
      });
      excluded[path] = sx[0].terminated() || sy[0].terminated();
      err[path] = worst;
    }
  });
  ConjugacyReport r;
  r.dt = config.dt;
  r.n_paths = n;
  std::size_t ex = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (excluded[p]) ++ex;
    else r.errors.push_back(err[p]);
  }
  r.excluded_fraction = static_cast<double>(ex) / static_cast<double>(n);
  std::vector<double> sorted = r.errors;
  std::sort(sorted.begin(), sorted.end());
  r.median = quantile_sorted(sorted, 0.5);
  r.q95 = quantile_sorted(sorted, 0.95);
  r.max = sorted.empty() ? 0.0 : sorted.back();
  return r;
}

ConjugacyRefinement conjugacy_refinement(const SdeProblem& problem, const ZvonkinTransform& transform,
                                         const SimulationConfig& config, double x, const std::vector<double>& dts,
                                         double ratio_lo, double ratio_hi) {
  if (dts.size() < 2) throw Error(ErrorCode::InvalidArgument, "conjugacy_refinement needs at least two step sizes");
  ConjugacyRefinement out;
  out.ratio_lo = ratio_lo;
  out.ratio_hi = ratio_hi;
  for (double dt : dts) {
    SimulationConfig c = config;
    c.dt = dt;
    out.levels.push_back(conjugacy_check(problem, transform, c, x));
  }
  out.monotone = true;
  out.ratios_in_window = true;
  for (std::size_t k = 0; k + 1 < out.levels.size(); ++k) {
    const double a = out.levels[k].median, b = out.levels[k + 1].median;
    const double ratio = b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
    out.ratios.push_back(ratio);
    out.monotone = out.monotone && b < a;
    out.ratios_in_window = out.ratios_in_window && ratio >= ratio_lo && ratio <= ratio_hi;
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::Io, "ZVK1: truncated stream");
  return v;
}

}  // namespace

void write_solution(const PdeSolution& s, std::ostream& out) {
  out.write("ZVK1", 4);
  put<std::uint32_t>(out, 1);
  put(out, s.lambda);
  put(out, s.R0);
  put(out, s.u.x0());
  put(out, s.u.dx());
  put<std::uint64_t>(out, s.u.nx());
  put<std::uint64_t>(out, s.u.times().size());
  for (double t : s.u.times()) put(out, t);
  out.write(reinterpret_cast<const char*>(s.u.data().data()),
            static_cast<std::streamsize>(s.u.data().size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::Io, "ZVK1: write failed");
}

PdeSolution read_solution(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ZVK1", 4) != 0) throw Error(ErrorCode::Io, "ZVK1: bad magic");
  if (get<std::uint32_t>(in) != 1) throw Error(ErrorCode::Io, "ZVK1: unsupported version");
  PdeSolution s;
  s.lambda = get<double>(in);
  s.R0 = get<double>(in);
  const double x0 = get<double>(in);
  const double dx = get<double>(in);
  const auto nx = get<std::uint64_t>(in);
  const auto nt = get<std::uint64_t>(in);
  if (nx < 4 || nt == 0 || nx > (1ull << 28) || nt > (1ull << 28)) throw Error(ErrorCode::Io, "ZVK1: bad header");
  std::vector<double> times(nt);
  for (auto& t : times) t = get<double>(in);
  s.u = GridTable(x0, dx, nx, std::move(times));
  if (!in.read(reinterpret_cast<char*>(s.u.data().data()), static_cast<std::streamsize>(s.u.data().size() * sizeof(double))))
    throw Error(ErrorCode::Io, "ZVK1: truncated table");
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) s.sup_u = std::max(s.sup_u, std::abs(s.u.at(n, i)));
    for (std::size_t i = 1; i + 1 < nx; ++i)
      s.sup_du = std::max(s.sup_du, std::abs(s.u.at(n, i + 1) - s.u.at(n, i - 1)) / (2.0 * dx));
  }
  s.accepted = s.sup_u + s.sup_du <= 0.5;
  s.boundary_margin = -x0 - 2.0 * s.R0;
  return s;
}

}  // namespace flowlab
