#pragma once

#include "flowlab/coefficients.hpp"
#include "flowlab/integrators.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace flowlab {

/// Radial cutoff chi_R: 1 on |x| <= R, 0 on |x| >= 2R, quintic smoothstep between.
struct Cutoff {
  double R = 1.0;

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  /// sup |chi_R'| = 15 / (8 R).
  double gradient_bound() const { return 15.0 / (8.0 * R); }
};

struct DriftSplit {
  double R0 = 4.0;
  Cutoff chi;
  /// b chi_{R0}, compactly supported.
  std::function<double(double, double)> b1;
  /// b - b1.
  std::function<double(double, double)> b2;
  double grad_chi_sup = 0.0;  // measured on the audit grid
  bool grad_chi_ok = false;   // <= 1/2
  double reconstruction_error = 0.0;  // max |b1 + b2 - b| / (1 + |b|)
};

/// One-dimensional problems only; R0 >= 4.
DriftSplit split_drift(const SdeProblem& problem, double R0);

/// Uniform space-time table with cubic (Catmull-Rom) interpolation in x and linear in t.
class GridTable {
 public:
  GridTable() = default;
  GridTable(double x0, double dx, std::size_t nx, std::vector<double> times);

  double x0() const noexcept { return x0_; }
  double dx() const noexcept { return dx_; }
  std::size_t nx() const noexcept { return nx_; }
  const std::vector<double>& times() const noexcept { return times_; }
  double x(std::size_t i) const noexcept { return x0_ + dx_ * static_cast<double>(i); }
  double& at(std::size_t n, std::size_t i) { return data_[n * nx_ + i]; }
  double at(std::size_t n, std::size_t i) const { return data_[n * nx_ + i]; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  /// Interpolated value; zero outside the spatial range.
  double eval(double t, double x) const;
  /// Interpolated x-derivative of the cubic.
  double eval_dx(double t, double x) const;
  double eval_slice(std::size_t n, double x) const;

 private:
  double x0_ = 0.0, dx_ = 1.0;
  std::size_t nx_ = 0;
  std::vector<double> times_;
  std::vector<double> data_;
};

struct PdeOptions {
  double horizon = 1.0;
  /// Spatial box [-half_width, half_width]; 0 selects 6 R0.
  double half_width = 0.0;
  std::size_t nx = 2401;
  std::size_t nt = 1000;
  double lambda0 = 1.0;
  int max_doublings = 40;
};

struct LambdaAttempt {
  double lambda = 0.0;
  double sup_u = 0.0;
  double sup_du = 0.0;
};

struct PdeSolution {
  double lambda = 0.0;
  double R0 = 4.0;
  GridTable u;
  double sup_u = 0.0;
  double sup_du = 0.0;
  bool accepted = false;
  std::vector<LambdaAttempt> trace;
  /// Distance from the support of b1 to the lateral boundary.
  double boundary_margin = 0.0;
};

/// Single implicit solve of d_t u + (1/2) a u'' + b1 u' + b1 = lambda u, u(T) = 0, u = 0 on the box edge.
PdeSolution solve_backward_pde_fixed(const std::function<double(double, double)>& b1,
                                     const std::function<double(double, double)>& a, double lambda, double R0,
                                     const PdeOptions& options);

/// Doubles lambda from options.lambda0 until sup|u| + sup|u'| <= 1/2.
PdeSolution solve_backward_pde(const std::function<double(double, double)>& b1,
                               const std::function<double(double, double)>& a, double R0, const PdeOptions& options);

struct SandwichCheck {
  double min_slope = 0.0;
  double max_slope = 0.0;
  bool pass = false;
  double worst_x = 0.0, worst_y = 0.0, worst_t = 0.0;
};

class ZvonkinTransform {
 public:
  /// Builds Phi = x + u chi_{2R0}, its inverse, h and the transformed coefficients.
  /// Throws Error{SolverFailure} when the solution is not accepted or the sandwich fails.
  ZvonkinTransform(const SdeProblem& problem, const DriftSplit& split, PdeSolution solution);

  double phi(double t, double x) const;
  double phi_dx(double t, double x) const;
  double phi_inv(double t, double y) const;
  double h(double t, double x) const;
  double sigma_tilde(double t, double y) const;
  double b_tilde(double t, double y) const;

  /// Radius beyond which Phi is the identity and the coefficients are unchanged.
  double R1() const noexcept { return R1_; }
  const PdeSolution& solution() const noexcept { return solution_; }
  const SandwichCheck& sandwich() const noexcept { return sandwich_; }
  /// max |Phi(Phi^{-1}(y)) - y| at cell midpoints of the inverse table.
  double inverse_error() const noexcept { return inverse_error_; }
  /// True when u vanishes identically; evaluations then bypass the tables.
  bool is_identity() const noexcept { return identity_; }
  /// The transformed problem dY = b~ dt + sigma~ dW.
  SdeProblem transformed_problem() const;

 private:
  double u_cut(double t, double x) const;

  SdeProblem problem_;
  DriftSplit split_;
  PdeSolution solution_;
  Cutoff chi2_;
  double R1_ = 0.0;
  std::shared_ptr<GridTable> phi_inv_, sigma_t_, b_t_;
  SandwichCheck sandwich_;
  double inverse_error_ = 0.0;
  bool identity_ = false;
};

struct ConjugacyReport {
  double dt = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> errors;  // per included path, max_k |Y_k - Phi(t_k, X_k)|
  double median = 0.0;
  double q95 = 0.0;
  double max = 0.0;
  double excluded_fraction = 0.0;
};

/// X under (b, sigma) and Y under (b~, sigma~) from Phi_0(x) on identical increments.
ConjugacyReport conjugacy_check(const SdeProblem& problem, const ZvonkinTransform& transform,
                                const SimulationConfig& config, double x);

struct ConjugacyRefinement {
  std::vector<ConjugacyReport> levels;
  std::vector<double> ratios;  // median(dt_k) / median(dt_{k+1})
  bool monotone = false;
  bool ratios_in_window = false;
  double ratio_lo = 1.2, ratio_hi = 3.0;
};

ConjugacyRefinement conjugacy_refinement(const SdeProblem& problem, const ZvonkinTransform& transform,
                                         const SimulationConfig& config, double x, const std::vector<double>& dts,
                                         double ratio_lo = 1.2, double ratio_hi = 3.0);

/// Binary layout, little-endian: char[4] "ZVK1" | u32 version(=1) | f64 lambda | f64 R0
/// | f64 x0 | f64 dx | u64 nx | u64 n_times | f64 times[n_times] | f64 u[n_times][nx].
void write_solution(const PdeSolution& s, std::ostream& out);
PdeSolution read_solution(std::istream& in);

}  // namespace flowlab
