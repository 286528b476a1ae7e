#pragma once

#include "flowlab/coefficients.hpp"
#include "flowlab/integrators.hpp"
#include "flowlab/lyapunov.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace flowlab {

using SpaceTimeFn = std::function<double(double, const Vec&)>;

/// Integrand values above this are clipped.
inline constexpr double kOccupationClip = 1e12;

struct OccupationEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double f_norm = 0.0;
  double ratio = 0.0;
  double clip_fraction = 0.0;
  std::size_t n_paths = 0;
};

/// E int_0^T f(t, X_t) dt by left-endpoint quadrature on the recorded grid.
OccupationEstimate occupation_integral(const PathEnsemble& ensemble, const SpaceTimeFn& f);

/// Streaming variant on the full simulation grid (no ensemble is stored).
OccupationEstimate occupation_integral(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                       const SpaceTimeFn& f);

/// Per-path integrals of several integrands on one simulation, optionally stopped
/// at the first grid time with |X| >= stop_radius. Result is [integrand][path].
struct OccupationSamples {
  std::vector<std::vector<double>> integrals;
  double clip_fraction = 0.0;
  double exploded_fraction = 0.0;
};
OccupationSamples occupation_samples(const CoefficientField& field, const SimulationConfig& config, const Vec& x,
                                     const std::vector<SpaceTimeFn>& fs,
                                     std::optional<double> stop_radius = std::nullopt);

struct KhasminskiiPoint {
  Vec x;
  double occupation = 0.0;  // E int f 1{|X|<=R}
  double occupation_se = 0.0;
  double lhs = 0.0;  // E exp{int f 1{|X|<=R}}
  double lhs_se = 0.0;
  double rhs = 0.0;  // 1 + E int f 1{|X|<=R} / (1 - c)
  double diff = 0.0;  // mean of e^I - 1 - I/(1-c)
  double diff_se = 0.0;
  double tail_fraction = 0.0;
  bool pass = false;
};

struct KhasminskiiReport {
  double R = 0.0;
  double c = 0.0;
  double c_std_error = 0.0;
  bool applicable = false;
  double lhs = 0.0;  // at the point with the largest lhs - rhs
  double rhs = 0.0;
  bool pass = false;
  std::vector<KhasminskiiPoint> points;
  Verdict verdict = Verdict::Fail;
  std::string note;
};

KhasminskiiReport khasminskii_check(const SdeProblem& problem, const SimulationConfig& config, const SpaceTimeFn& f,
                                    double R, const std::vector<Vec>& x_grid);

struct KrylovMember {
  std::string name;
  SpaceTimeFn f;
  /// Exact L^q norm; the box quadrature is used when absent.
  std::optional<double> norm;
};

struct KrylovBox {
  double t0 = 0.0, t1 = 1.0;
  double lo = -1.0, hi = 1.0;  // spatial cube [lo, hi]^d
  std::size_t nodes_per_axis = 200;
};

struct KrylovRow {
  std::string name;
  double occupation = 0.0;
  double std_error = 0.0;
  double f_norm = 0.0;
  double ratio = 0.0;
  bool norm_from_box = false;
};

struct KrylovReport {
  double q = 2.0;
  std::vector<KrylovRow> rows;
  double max_ratio = 0.0;
  /// Last ratio within four times the first.
  bool bounded = false;
  std::vector<std::string> warnings;
  Verdict verdict = Verdict::Fail;
};

/// Midpoint-rule (int int |f|^q dx dt)^{1/q} over the box.
double lq_norm_on_box(const SpaceTimeFn& f, double q, int dim, const KrylovBox& box);

KrylovReport krylov_ratio(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                          const std::vector<KrylovMember>& family, double q, const KrylovBox& box = {});

struct ExpOccupationPoint {
  Vec x;
  MomentReport report;  // E exp{int f} against the fitted envelope
  double I1 = 0.0;      // E exp{2 int f 1{|X|>R0}}
  double I2 = 0.0;      // E exp{2 int f 1{|X|<=R0}}
  bool cauchy_schwarz = false;
};

struct ExpOccupationReport {
  std::vector<ExpOccupationPoint> points;
  double alpha = 1.0;
  double R0 = 1.0;
  double slope = 0.0;
  double envelope_C = 0.0;
  double envelope_gamma = 0.0;
  bool envelope_pass = false;
  Verdict verdict = Verdict::Fail;
};

ExpOccupationReport exp_occupation_check(const SdeProblem& problem, const SimulationConfig& config,
                                         const std::vector<Vec>& x_grid, const SpaceTimeFn& f, double R0);

struct LocalOccupationReport {
  double estimate = 0.0;  // on config.n_paths
  double std_error = 0.0;
  double reference = 0.0;  // on reference_paths
  double reference_se = 0.0;
  std::size_t n_paths = 0;
  std::size_t reference_paths = 0;
  double clip_fraction = 0.0;
  double tail_fraction = 0.0;
  bool stable = false;
  Verdict verdict = Verdict::Fail;
};

/// E exp{int_0^{T ^ tau_R} f(t, X_t) dt}; stable when the estimates on n and on
/// reference_paths (a superset of the same streams) agree within 3 pooled SE.
LocalOccupationReport local_exp_occupation_check(const SdeProblem& problem, const SimulationConfig& config,
                                                 const Vec& x, const SpaceTimeFn& f, double R,
                                                 std::size_t reference_paths = 0);

}  // namespace flowlab
