#pragma once

#include "flowlab/coefficients.hpp"
#include "flowlab/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flowlab {

enum class Scheme { TamedEuler, DriftImplicitEuler, EulerMaruyama };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct SimulationConfig {
  Scheme scheme = Scheme::TamedEuler;
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  double explosion_cap = 1e6;
  bool store_increments = false;
  /// Keep every k-th grid state in recorded ensembles (the final state is always kept).
  std::size_t record_stride = 1;
  /// Added to every stream key; distinct offsets give independent ensembles.
  std::uint64_t stream_offset = 0;

  /// Throws Error{InvalidConfig} on dt <= 0, T < dt, n_paths == 0, R_cap <= 0.
  void validate() const;
  std::size_t n_steps() const;
};

/// Uniform grid with a truncated final step ending exactly at the horizon.
class TimeGrid {
 public:
  TimeGrid(double dt, double horizon);

  std::size_t steps() const noexcept { return times_.size() - 1; }
  double time(std::size_t k) const noexcept { return times_[k]; }
  double step_size(std::size_t k) const noexcept { return times_[k + 1] - times_[k]; }
  const std::vector<double>& times() const noexcept { return times_; }
  double horizon() const noexcept { return times_.back(); }

  /// Grid index equal to t (to 1e-9 relative); throws if t is off-grid.
  std::size_t index_of(double t) const;

 private:
  std::vector<double> times_;
};

inline constexpr std::size_t kNoExit = std::numeric_limits<std::size_t>::max();

struct PathStatus {
  bool exploded = false;
  bool solver_failed = false;
  /// First grid index at which the path was frozen.
  std::size_t exit_index = kNoExit;

  bool terminated() const noexcept { return exploded || solver_failed; }
};

/// One grid time of a noise-sharing bundle.
struct StepView {
  std::size_t step = 0;
  double t = 0.0;
  /// t_{k+1} - t_k; zero at the final index.
  double h = 0.0;
  std::span<const Vec> states;
  /// states[i] - states[0], propagated in difference form.
  std::span<const Vec> offsets;
  /// Brownian increment over [t, t+h]; nullptr at the final index.
  const Vec* increment = nullptr;
  std::span<const PathStatus> status;
};

using StepObserver = std::function<void(const StepView&)>;

/// Integrates bundles of starting points that share one Brownian path.
///
/// Member 0 is the base. Every other member carries its offset to the base
/// and advances it through the difference of the scheme's increments, so
/// constant coefficients leave the offsets bit-exact. Once the base is
/// frozen the remaining members continue in absolute form.
class BundleIntegrator {
 public:
  BundleIntegrator(const CoefficientField& field, const SimulationConfig& config);

  const TimeGrid& grid() const noexcept { return grid_; }
  const SimulationConfig& config() const noexcept { return config_; }

  std::vector<PathStatus> run(std::span<const Vec> starts, std::uint64_t stream, const StepObserver& observer) const;

 private:
  const CoefficientField& field_;
  SimulationConfig config_;
  TimeGrid grid_;
};

/// Paths are processed in fixed blocks of this size, sequentially inside a
/// block; per-block partial sums merged in block order are thread-count
/// independent.
inline constexpr std::size_t kPathBlock = 64;

inline std::size_t block_count(std::size_t n_paths) { return (n_paths + kPathBlock - 1) / kPathBlock; }

using PathObserver = std::function<void(std::size_t path, const StepView&)>;

/// Runs config.n_paths bundles (stream = stream_offset + path) in parallel
/// blocks. Statuses are returned row-major [path][member].
std::vector<PathStatus> run_bundles(const CoefficientField& field, const SimulationConfig& config,
                                    std::span<const Vec> starts, const PathObserver& observer);

/// Convenience for single-member bundles.
std::vector<PathStatus> run_paths(const CoefficientField& field, const SimulationConfig& config, const Vec& x0,
                                  const PathObserver& observer);

struct Coupling {
  /// (path id of X(x), path id of X(y)); empty for uncoupled ensembles.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  /// Start points per pair.
  std::vector<std::pair<Vec, Vec>> starts;
  /// Per-pair difference X(x) - X(y) as propagated by the integrator,
  /// row-major [pair replicate][time][dim] indexed by path id / 2.
  std::vector<double> pair_differences;

  bool synchronous() const noexcept { return !pairs.empty(); }
};

struct PathEnsemble {
  std::vector<double> time_grid;
  std::vector<std::size_t> grid_steps;
  std::size_t n_paths = 0;
  int dim = 0;
  int noise_dim = 0;
  /// Row-major [path][time][dim].
  std::vector<double> states;
  std::vector<PathStatus> status;
  /// Optional Brownian increments, row-major [path][step][noise_dim].
  std::vector<double> increments;
  Coupling coupling;
  std::uint64_t seed = 0;
  std::uint64_t stream_offset = 0;
  /// Start point index for each path (for ensembles over several initial points).
  std::vector<std::size_t> start_index;

  std::size_t n_times() const noexcept { return time_grid.size(); }
  double state(std::size_t path, std::size_t time, int j) const {
    return states[(path * n_times() + time) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
  }
  Vec state_vec(std::size_t path, std::size_t time) const;
  /// Recorded-grid index at which the path was frozen (n_times when never).
  std::size_t recorded_exit(std::size_t path) const;
  double exploded_fraction() const;
};

/// Independent paths from each initial point (path id = point * n_paths + replicate).
PathEnsemble simulate(const SdeProblem& problem, const SimulationConfig& config, std::span<const Vec> initial);
PathEnsemble simulate(const SdeProblem& problem, const SimulationConfig& config, const Vec& initial);

/// Synchronously coupled pairs. For pair p and replicate r the paths X(x) and
/// X(y) have ids 2(p n + r) and 2(p n + r) + 1 and share stream offset + r,
/// so all pairs of one replicate are driven by the same Brownian path.
PathEnsemble coupled_simulate(const SdeProblem& problem, const SimulationConfig& config,
                              std::span<const std::pair<Vec, Vec>> pairs);

/// First recorded time with |X| >= radius per path (+inf when never reached).
std::vector<double> first_exit(const PathEnsemble& ensemble, double radius, double explosion_cap);

void write_csv(const PathEnsemble& ensemble, std::ostream& out);

/// Binary layout, all little-endian:
///   char[4] "FLW1" | u32 version(=1) | u32 dim | u32 noise_dim
///   u64 n_paths | u64 n_times | f64 times[n_times]
///   f64 states[n_paths][n_times][dim] | u8 exploded[n_paths] | u64 exit_index[n_paths]
/// exit_index counts recorded times; all-ones means the path was never frozen.
void write_binary(const PathEnsemble& ensemble, std::ostream& out);
PathEnsemble read_binary(std::istream& in);

/// The scheme's drift increment factor: b / (1 + h |b|) for tamed Euler, b otherwise.
Vec scheme_drift(Scheme scheme, const Vec& b, double h);

}  // namespace flowlab
