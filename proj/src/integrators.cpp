#include "flowlab/integrators.hpp"

#include "flowlab/parallel.hpp"
#include "flowlab/rng.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace flowlab {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::TamedEuler: return "tamed-euler";
    case Scheme::DriftImplicitEuler: return "drift-implicit-euler";
    case Scheme::EulerMaruyama: return "euler-maruyama";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "tamed-euler") return Scheme::TamedEuler;
  if (name == "drift-implicit-euler") return Scheme::DriftImplicitEuler;
  if (name == "euler-maruyama") return Scheme::EulerMaruyama;
  throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + name + "'");
}

void SimulationConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidConfig, "dt must be positive");
  if (!(horizon >= dt) || !std::isfinite(horizon)) throw Error(ErrorCode::InvalidConfig, "horizon must be >= dt");
  if (n_paths == 0) throw Error(ErrorCode::InvalidConfig, "n_paths must be >= 1");
  if (!(explosion_cap > 0.0)) throw Error(ErrorCode::InvalidConfig, "explosion_cap must be positive");
  if (record_stride == 0) throw Error(ErrorCode::InvalidConfig, "record_stride must be >= 1");
  if (n_steps() > (std::uint64_t{1} << 32)) throw Error(ErrorCode::InvalidConfig, "too many time steps");
}

std::size_t SimulationConfig::n_steps() const {
  return static_cast<std::size_t>(std::ceil(horizon / dt * (1.0 - 1e-12)));
}

TimeGrid::TimeGrid(double dt, double horizon) {
  SimulationConfig probe;
  probe.dt = dt;
  probe.horizon = horizon;
  probe.validate();
  const std::size_t n = probe.n_steps();
  times_.resize(n + 1);
  for (std::size_t k = 0; k < n; ++k) times_[k] = static_cast<double>(k) * dt;
  times_[n] = horizon;
}

std::size_t TimeGrid::index_of(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
  if (it == times_.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw Error(ErrorCode::InvalidArgument, "time " + std::to_string(t) + " is not on the simulation grid");
  return static_cast<std::size_t>(it - times_.begin());
}

Vec scheme_drift(Scheme scheme, const Vec& b, double h) {
  if (scheme == Scheme::TamedEuler) return b / (1.0 + h * b.norm());
  return b;
}

namespace {

constexpr double kNewtonTol = 1e-12;
constexpr int kNewtonMaxIter = 50;
constexpr int kMaxHalvings = 30;

// Solves z - h (b(anchor + z) - b_anchor) = r for z.
class ImplicitSolver {
 public:
  ImplicitSolver(const CoefficientField& field, double t, double h) : field_(field), t_(t), h_(h) {}

  bool solve(const Vec& anchor, const Vec& b_anchor, const Vec& r, Vec& z) const {
    z = r;
    if (newton(anchor, b_anchor, r, z)) return true;
    if (r.size() == 1) return bisect(anchor, b_anchor, r, z);
    return false;
  }

 private:
  Vec residual(const Vec& anchor, const Vec& b_anchor, const Vec& r, const Vec& z) const {
    return z - h_ * (field_.b(t_, anchor + z) - b_anchor) - r;
  }

  bool newton(const Vec& anchor, const Vec& b_anchor, const Vec& r, Vec& z) const {
    const int d = static_cast<int>(r.size());
    Vec g = residual(anchor, b_anchor, r, z);
    double gn = g.norm();
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      if (!std::isfinite(gn)) return false;
      if (gn <= kNewtonTol * (1.0 + r.norm())) return true;
      Mat jac(d, d);
      for (int j = 0; j < d; ++j) {
        const double eps = 1e-7 * std::max(1.0, std::abs(anchor(j) + z(j)));
        Vec zp = z;
        zp(j) += eps;
        jac.col(j) = (residual(anchor, b_anchor, r, zp) - g) / eps;
      }
      const Vec step = jac.fullPivLu().solve(g);
      if (!step.allFinite()) return false;
      double lambda = 1.0;
      bool improved = false;
      for (int k = 0; k <= kMaxHalvings; ++k, lambda *= 0.5) {
        const Vec trial = z - lambda * step;
        const Vec gt = residual(anchor, b_anchor, r, trial);
        const double gtn = gt.norm();
        if (std::isfinite(gtn) && gtn < gn) {
          z = trial;
          g = gt;
          gn = gtn;
          improved = true;
          break;
        }
      }
      if (!improved) return false;
      if (lambda * step.norm() <= kNewtonTol * (1.0 + z.norm())) return gn <= 1e-8 * (1.0 + r.norm());
    }
    return gn <= kNewtonTol * (1.0 + r.norm());
  }

  bool bisect(const Vec& anchor, const Vec& b_anchor, const Vec& r, Vec& z) const {
    auto G = [&](double v) { return residual(anchor, b_anchor, r, scalar_vec(v))(0); };
    const double centre = r(0);
    double width = 10.0;
    double lo = 0, hi = 0, glo = 0, ghi = 0;
    bool bracketed = false;
    for (int k = 0; k < 60 && !bracketed; ++k, width *= 2.0) {
      lo = centre - width;
      hi = centre + width;
      glo = G(lo);
      ghi = G(hi);
      if (!std::isfinite(glo) || !std::isfinite(ghi)) return false;
      bracketed = (glo <= 0.0) != (ghi <= 0.0);
    }
    if (!bracketed) return false;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++k) {
      const double mid = 0.5 * (lo + hi);
      const double gm = G(mid);
      if (gm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((gm <= 0.0) == (glo <= 0.0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    // For a drift with a jump the root may be the jump point itself.
    z = scalar_vec(0.5 * (lo + hi));
    return true;
  }

  const CoefficientField& field_;
  double t_;
  double h_;
};

}  // namespace

BundleIntegrator::BundleIntegrator(const CoefficientField& field, const SimulationConfig& config)
    : field_(field), config_(config), grid_(config.dt, config.horizon) {
  config_.validate();
  if (field.dim < 1 || field.dim > kMaxDim || field.noise_dim < 1 || field.noise_dim > kMaxDim)
    throw Error(ErrorCode::InvalidConfig, "dimensions must lie in [1, " + std::to_string(kMaxDim) + "]");
}

namespace {

// One bundle path with the vector arithmetic unrolled for dimensions (D, M).
// Storage stays in Vec so observers see the usual types.
template <int D, int M>
std::vector<PathStatus> run_fixed(const CoefficientField& field, const SimulationConfig& config, const TimeGrid& grid,
                                  std::span<const Vec> starts, std::uint64_t stream, const StepObserver& observer) {
  const std::size_t members = starts.size();
  auto H = [](auto& v) { return v.template head<D>(); };
  // Negated so that NaN counts as escaped.
  auto escaped = [&](const Vec& v) { return !(H(v).squaredNorm() <= config.explosion_cap * config.explosion_cap); };

  std::vector<Vec> x(starts.begin(), starts.end());
  std::vector<Vec> off(members, Vec::Zero(D));
  std::vector<PathStatus> status(members);
  for (std::size_t i = 1; i < members; ++i) H(off[i]) = H(x[i]) - H(x[0]);
  for (std::size_t i = 0; i < members; ++i)
    if (escaped(x[i])) {
      status[i].exploded = true;
      status[i].exit_index = 0;
    }

  const GaussianStream rng(config.seed, stream);
  std::array<double, kMaxDim> normals{};
  Vec dw = Vec::Zero(M);
  const std::size_t n = grid.steps();
  const bool implicit = config.scheme == Scheme::DriftImplicitEuler;
  const bool tamed = config.scheme == Scheme::TamedEuler;

  std::vector<Vec> a(members, Vec::Zero(D)), s_dw(members, Vec::Zero(D));
  std::vector<Vec> next(members, Vec::Zero(D)), next_off(members, Vec::Zero(D));
  std::size_t live = 0;
  for (const auto& st : status) live += st.terminated() ? 0 : 1;

  for (std::size_t k = 0;; ++k) {
    const double t = grid.time(k);
    const bool last = k == n;
    const double h = last ? 0.0 : grid.step_size(k);
    if (!last) {
      rng.fill(k, std::span<double>(normals.data(), static_cast<std::size_t>(M)));
      const double sq = std::sqrt(h);
      for (int j = 0; j < M; ++j) dw(j) = sq * normals[static_cast<std::size_t>(j)];
    }
    if (observer) {
      StepView view;
      view.step = k;
      view.t = t;
      view.h = h;
      view.states = x;
      view.offsets = off;
      view.increment = last ? nullptr : &dw;
      view.status = status;
      observer(view);
    }
    if (last) break;
    if (live == 0) continue;

    const bool base_live = !status[0].terminated();
    const double t_next = grid.time(k + 1);

    // Scheme increments split into drift and noise parts.
    for (std::size_t i = 0; i < members; ++i) {
      if (status[i].terminated()) continue;
      const Mat sig = field.sigma(t, x[i]);
      H(s_dw[i]).noalias() = sig.template topLeftCorner<D, M>() * dw.template head<M>();
      if (!implicit) {
        const Vec b = field.b(t, x[i]);
        const double f = tamed ? h / (1.0 + h * H(b).norm()) : h;
        H(a[i]) = f * H(b);
      }
    }

    if (!implicit) {
      if (base_live) H(next[0]) = H(x[0]) + H(a[0]) + H(s_dw[0]);
      const bool diff_form = base_live && H(next[0]).allFinite();
      for (std::size_t i = 1; i < members; ++i) {
        if (status[i].terminated()) continue;
        if (diff_form) {
          H(next_off[i]) = H(off[i]) + ((H(a[i]) - H(a[0])) + (H(s_dw[i]) - H(s_dw[0])));
          H(next[i]) = H(next[0]) + H(next_off[i]);
        } else {
          H(next[i]) = H(x[i]) + H(a[i]) + H(s_dw[i]);
        }
      }
    } else {
      const ImplicitSolver solver(field, t_next, h);
      const Vec zero = Vec::Zero(D);
      bool base_solved = false;
      if (base_live) {
        Vec z;
        base_solved = solver.solve(zero, zero, x[0] + s_dw[0], z);
        next[0] = z;
        if (!base_solved) {
          status[0].solver_failed = true;
          status[0].exit_index = k + 1;
        }
      }
      const bool diff_form = base_live && base_solved && next[0].allFinite();
      const Vec b0 = diff_form ? field.b(t_next, next[0]) : zero;
      for (std::size_t i = 1; i < members; ++i) {
        if (status[i].terminated()) continue;
        Vec z;
        bool ok;
        if (diff_form) {
          ok = solver.solve(next[0], b0, off[i] + (s_dw[i] - s_dw[0]), z);
          next_off[i] = z;
          next[i] = next[0] + z;
        } else {
          ok = solver.solve(zero, zero, x[i] + s_dw[i], z);
          next[i] = z;
        }
        if (!ok) {
          status[i].solver_failed = true;
          status[i].exit_index = k + 1;
        }
      }
    }

    // Advance, freezing members that leave the ball of radius R_cap.
    const bool base_was_live = base_live && !status[0].terminated();
    for (std::size_t i = 0; i < members; ++i) {
      if (status[i].terminated()) continue;
      if (escaped(next[i])) {
        status[i].exploded = true;
        status[i].exit_index = k + 1;
        if (H(next[i]).allFinite()) H(x[i]) = H(next[i]);
        continue;
      }
      H(x[i]) = H(next[i]);
    }
    live = 0;
    for (const auto& st : status) live += st.terminated() ? 0 : 1;
    const bool base_still = base_was_live && !status[0].terminated();
    for (std::size_t i = 1; i < members; ++i) {
      if (base_still && !status[i].terminated()) H(off[i]) = H(next_off[i]);
      else H(off[i]) = H(x[i]) - H(x[0]);
    }
  }
  return status;
}

template <int D, int M = 1>
std::vector<PathStatus> dispatch(int m, const CoefficientField& field, const SimulationConfig& config,
                                 const TimeGrid& grid, std::span<const Vec> starts, std::uint64_t stream,
                                 const StepObserver& observer) {
  if constexpr (M < kMaxDim) {
    if (m != M) return dispatch<D, M + 1>(m, field, config, grid, starts, stream, observer);
  }
  return run_fixed<D, M>(field, config, grid, starts, stream, observer);
}

}  // namespace

std::vector<PathStatus> BundleIntegrator::run(std::span<const Vec> starts, std::uint64_t stream,
                                              const StepObserver& observer) const {
  if (starts.empty()) throw Error(ErrorCode::InvalidArgument, "bundle needs at least one start point");
  const int d = field_.dim;
  const int m = field_.noise_dim;
  for (const Vec& s : starts)
    if (s.size() != d || !s.allFinite()) throw Error(ErrorCode::InvalidArgument, "start point must be finite with dimension d");
  switch (d) {
    case 1: return dispatch<1>(m, field_, config_, grid_, starts, stream, observer);
    case 2: return dispatch<2>(m, field_, config_, grid_, starts, stream, observer);
    case 3: return dispatch<3>(m, field_, config_, grid_, starts, stream, observer);
    default: return dispatch<4>(m, field_, config_, grid_, starts, stream, observer);
  }
}

std::vector<PathStatus> run_bundles(const CoefficientField& field, const SimulationConfig& config,
                                    std::span<const Vec> starts, const PathObserver& observer) {
  const BundleIntegrator integrator(field, config);
  const std::size_t members = starts.size();
  std::vector<PathStatus> status(config.n_paths * members);
  parallel::for_each_index(block_count(config.n_paths), [&](std::size_t block) {
    const std::size_t begin = block * kPathBlock;
    const std::size_t end = std::min(config.n_paths, begin + kPathBlock);
    for (std::size_t path = begin; path < end; ++path) {
      StepObserver obs;
      if (observer) obs = [&observer, path](const StepView& v) { observer(path, v); };
      const auto st = integrator.run(starts, config.stream_offset + path, obs);
      std::copy(st.begin(), st.end(), status.begin() + static_cast<std::ptrdiff_t>(path * members));
    }
  });
  return status;
}

std::vector<PathStatus> run_paths(const CoefficientField& field, const SimulationConfig& config, const Vec& x0,
                                  const PathObserver& observer) {
  return run_bundles(field, config, std::span<const Vec>(&x0, 1), observer);
}

namespace {

struct Recording {
  std::vector<std::size_t> steps;
  std::size_t stride = 1;

  Recording(const TimeGrid& grid, std::size_t record_stride) : stride(record_stride) {
    const std::size_t n = grid.steps();
    for (std::size_t k = 0; k < n; k += stride) steps.push_back(k);
    steps.push_back(n);
  }

  // Recorded index of grid step k, or npos when k is not recorded.
  std::size_t slot(std::size_t k) const {
    if (k == steps.back()) return steps.size() - 1;
    if (k % stride == 0) return k / stride;
    return static_cast<std::size_t>(-1);
  }
};

PathEnsemble empty_ensemble(const SdeProblem& problem, const SimulationConfig& config, const TimeGrid& grid,
                            const Recording& rec, std::size_t n_paths) {
  PathEnsemble e;
  e.grid_steps = rec.steps;
  for (std::size_t k : rec.steps) e.time_grid.push_back(grid.time(k));
  e.n_paths = n_paths;
  e.dim = problem.field.dim;
  e.noise_dim = problem.field.noise_dim;
  e.states.assign(n_paths * e.time_grid.size() * static_cast<std::size_t>(e.dim), 0.0);
  e.status.resize(n_paths);
  if (config.store_increments)
    e.increments.assign(n_paths * grid.steps() * static_cast<std::size_t>(e.noise_dim), 0.0);
  e.seed = config.seed;
  e.stream_offset = config.stream_offset;
  return e;
}

void record_member(PathEnsemble& e, const Recording& rec, std::size_t path, const StepView& v, std::size_t member) {
  const std::size_t slot = rec.slot(v.step);
  if (slot != static_cast<std::size_t>(-1)) {
    const Vec& x = v.states[member];
    double* dst = e.states.data() + (path * e.n_times() + slot) * static_cast<std::size_t>(e.dim);
    for (int j = 0; j < e.dim; ++j) dst[j] = x(j);
  }
  if (!e.increments.empty() && v.increment) {
    const std::size_t steps = e.grid_steps.back();
    double* dst = e.increments.data() + (path * steps + v.step) * static_cast<std::size_t>(e.noise_dim);
    for (int j = 0; j < e.noise_dim; ++j) dst[j] = (*v.increment)(j);
  }
}

}  // namespace

Vec PathEnsemble::state_vec(std::size_t path, std::size_t time) const {
  Vec v(dim);
  for (int j = 0; j < dim; ++j) v(j) = state(path, time, j);
  return v;
}

std::size_t PathEnsemble::recorded_exit(std::size_t path) const {
  const std::size_t k = status[path].exit_index;
  if (k == kNoExit) return n_times();
  return static_cast<std::size_t>(std::lower_bound(grid_steps.begin(), grid_steps.end(), k) - grid_steps.begin());
}

double PathEnsemble::exploded_fraction() const {
  if (n_paths == 0) return 0.0;
  std::size_t c = 0;
  for (const auto& s : status) c += s.exploded ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(n_paths);
}

PathEnsemble simulate(const SdeProblem& problem, const SimulationConfig& config, std::span<const Vec> initial) {
  config.validate();
  if (initial.empty()) throw Error(ErrorCode::InvalidArgument, "simulate: no initial points");
  const TimeGrid grid(config.dt, config.horizon);
  const Recording rec(grid, config.record_stride);
  const std::size_t n = config.n_paths;
  PathEnsemble e = empty_ensemble(problem, config, grid, rec, n * initial.size());
  const BundleIntegrator integrator(problem.field, config);
  for (std::size_t p = 0; p < initial.size(); ++p)
    for (std::size_t r = 0; r < n; ++r) e.start_index.push_back(p);

  const std::size_t total = e.n_paths;
  parallel::for_each_index(block_count(total), [&](std::size_t block) {
    const std::size_t begin = block * kPathBlock;
    const std::size_t end = std::min(total, begin + kPathBlock);
    for (std::size_t path = begin; path < end; ++path) {
      const Vec& x0 = initial[path / n];
      const auto st = integrator.run(std::span<const Vec>(&x0, 1), config.stream_offset + path,
                                     [&](const StepView& v) { record_member(e, rec, path, v, 0); });
      e.status[path] = st[0];
    }
  });
  return e;
}

PathEnsemble simulate(const SdeProblem& problem, const SimulationConfig& config, const Vec& initial) {
  return simulate(problem, config, std::span<const Vec>(&initial, 1));
}

PathEnsemble coupled_simulate(const SdeProblem& problem, const SimulationConfig& config,
                              std::span<const std::pair<Vec, Vec>> pairs) {
  config.validate();
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "coupled_simulate: no pairs");
  const TimeGrid grid(config.dt, config.horizon);
  const Recording rec(grid, config.record_stride);
  const std::size_t n = config.n_paths;
  const std::size_t bundles = pairs.size() * n;
  PathEnsemble e = empty_ensemble(problem, config, grid, rec, 2 * bundles);
  const BundleIntegrator integrator(problem.field, config);
  const auto d = static_cast<std::size_t>(e.dim);
  e.coupling.pair_differences.assign(bundles * e.n_times() * d, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    e.coupling.starts.push_back(pairs[p]);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t q = p * n + r;
      e.coupling.pairs.emplace_back(2 * q, 2 * q + 1);
      e.start_index.push_back(p);
      e.start_index.push_back(p);
    }
  }

  parallel::for_each_index(block_count(bundles), [&](std::size_t block) {
    const std::size_t begin = block * kPathBlock;
    const std::size_t end = std::min(bundles, begin + kPathBlock);
    for (std::size_t q = begin; q < end; ++q) {
      const std::size_t p = q / n, r = q % n;
      // Base y, member x: the offset carries Z = X(x) - X(y).
      const std::array<Vec, 2> starts{pairs[p].second, pairs[p].first};
      const auto st = integrator.run(starts, config.stream_offset + r, [&](const StepView& v) {
        record_member(e, rec, 2 * q, v, 1);
        record_member(e, rec, 2 * q + 1, v, 0);
        const std::size_t slot = rec.slot(v.step);
        if (slot != static_cast<std::size_t>(-1)) {
          double* dst = e.coupling.pair_differences.data() + (q * e.n_times() + slot) * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] = v.offsets[1](static_cast<Eigen::Index>(j));
        }
      });
      e.status[2 * q] = st[1];
      e.status[2 * q + 1] = st[0];
    }
  });
  return e;
}

std::vector<double> first_exit(const PathEnsemble& ensemble, double radius, double explosion_cap) {
  if (!(radius > 0.0) || radius > explosion_cap)
    throw Error(ErrorCode::InvalidArgument, "first_exit: radius must lie in (0, R_cap]");
  std::vector<double> out(ensemble.n_paths, std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
    for (std::size_t k = 0; k < ensemble.n_times(); ++k) {
      if (ensemble.state_vec(p, k).norm() >= radius) {
        out[p] = ensemble.time_grid[k];
        break;
      }
    }
    if (ensemble.status[p].exploded) {
      const std::size_t k = ensemble.recorded_exit(p);
      if (k < ensemble.n_times()) out[p] = std::min(out[p], ensemble.time_grid[k]);
    }
  }
  return out;
}

void write_csv(const PathEnsemble& e, std::ostream& out) {
  out << "path_id,step,t";
  for (int j = 0; j < e.dim; ++j) out << ",x_" << (j + 1);
  out << ",exploded\n";
  char buf[40];
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    const std::size_t exit = e.recorded_exit(p);
    for (std::size_t k = 0; k < e.n_times(); ++k) {
      out << p << ',' << e.grid_steps[k] << ',';
      std::snprintf(buf, sizeof buf, "%.17g", e.time_grid[k]);
      out << buf;
      for (int j = 0; j < e.dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", e.state(p, k, j));
        out << ',' << buf;
      }
      out << ',' << ((e.status[p].exploded && k >= exit) ? 1 : 0) << '\n';
    }
  }
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
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::Io, "FLW1: truncated stream");
  return v;
}

}  // namespace

void write_binary(const PathEnsemble& e, std::ostream& out) {
  out.write("FLW1", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e.noise_dim));
  put<std::uint64_t>(out, e.n_paths);
  put<std::uint64_t>(out, e.n_times());
  for (double t : e.time_grid) put(out, t);
  out.write(reinterpret_cast<const char*>(e.states.data()),
            static_cast<std::streamsize>(e.states.size() * sizeof(double)));
  for (const auto& s : e.status) put<std::uint8_t>(out, s.exploded ? 1 : 0);
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    const std::size_t k = e.recorded_exit(p);
    put<std::uint64_t>(out, k >= e.n_times() ? ~std::uint64_t{0} : k);
  }
  if (!out) throw Error(ErrorCode::Io, "FLW1: write failed");
}

PathEnsemble read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FLW1", 4) != 0) throw Error(ErrorCode::Io, "FLW1: bad magic");
  if (get<std::uint32_t>(in) != 1) throw Error(ErrorCode::Io, "FLW1: unsupported version");
  PathEnsemble e;
  e.dim = static_cast<int>(get<std::uint32_t>(in));
  e.noise_dim = static_cast<int>(get<std::uint32_t>(in));
  e.n_paths = get<std::uint64_t>(in);
  const auto n_times = get<std::uint64_t>(in);
  if (e.dim < 1 || e.dim > kMaxDim || n_times == 0) throw Error(ErrorCode::Io, "FLW1: bad header");
  e.time_grid.resize(n_times);
  for (auto& t : e.time_grid) t = get<double>(in);
  e.states.resize(e.n_paths * n_times * static_cast<std::size_t>(e.dim));
  if (!in.read(reinterpret_cast<char*>(e.states.data()),
               static_cast<std::streamsize>(e.states.size() * sizeof(double))))
    throw Error(ErrorCode::Io, "FLW1: truncated states");
  e.status.resize(e.n_paths);
  for (auto& s : e.status) s.exploded = get<std::uint8_t>(in) != 0;
  for (auto& s : e.status) {
    const auto k = get<std::uint64_t>(in);
    s.exit_index = k == ~std::uint64_t{0} ? kNoExit : static_cast<std::size_t>(k);
  }
  // Exit indices are stored on the recorded grid, which becomes the step grid.
  e.grid_steps.resize(n_times);
  for (std::size_t k = 0; k < n_times; ++k) e.grid_steps[k] = k;
  return e;
}

}  // namespace flowlab
