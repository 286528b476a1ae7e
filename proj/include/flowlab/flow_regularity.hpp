#pragma once

#include "flowlab/coefficients.hpp"
#include "flowlab/integrators.hpp"
#include "flowlab/lyapunov.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace flowlab {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

struct QuotientNorm {
  Vec x, y;
  double p = 2.0;
  double r = kInfNorm;
  /// Estimate of || X(x) - X(y) ||_{L^p(Omega; L^r(0,T))}.
  double value = 0.0;
  double std_error = 0.0;
  double excluded_fraction = 0.0;
  Verdict verdict = Verdict::Pass;
};

/// Norm of the propagated differences of pair `pair_index` of a coupled ensemble.
/// Paths with a frozen member are excluded; more than 1% excluded is inconclusive.
QuotientNorm quotient_norm(const PathEnsemble& coupled, std::size_t pair_index, double p, double r);

struct PairQuotient {
  std::size_t i = 0, j = 0;
  double distance = 0.0;
  double quotient = 0.0;   // norm / |x - y|
  double std_error = 0.0;  // of the quotient
};

struct SobolevWitness {
  std::vector<Vec> base_grid;
  std::vector<double> g;
  std::vector<double> g_std_error;
  double p = 2.0;
  double r = kInfNorm;
  std::vector<PairQuotient> pairs;
  int rounds = 0;
  bool converged = false;
  /// max quotient / (g(x) + g(y)); at most 1 for a valid witness.
  double max_violation = 0.0;
  std::size_t worst_pair = 0;
  double excluded_fraction = 0.0;
  double alpha = 1.0;
  /// Regression of log g on the envelope exponent.
  double envelope_slope = 0.0;
  double envelope_C = 0.0;
  double envelope_gamma = 0.0;
  bool envelope_pass = false;
  Verdict verdict = Verdict::Fail;
};

/// Couples every pair of grid points, estimates the quotients and fits the
/// smallest grid function g with quotient <= g(x) + g(y).
SobolevWitness witness_fit(const SdeProblem& problem, const SimulationConfig& config, const std::vector<Vec>& base_grid,
                           double p, double r);

/// The minimal-witness iteration on precomputed quotients.
void fit_witness_values(SobolevWitness& w, int max_rounds = 100);

/// Envelope shape test: alpha > 0 regresses log g on (1+|x|^2)^alpha and
/// requires slope <= 1; alpha = 0 fits gamma on log(1+|x|^2).
void fit_envelope(SobolevWitness& w, double alpha);

enum class GradientVariant { SupOfExpectation, ExpectationOfSup };

const char* to_string(GradientVariant v);
GradientVariant gradient_variant_from_string(const std::string& name);

struct FlowDerivativeEstimate {
  Vec x;
  double h = 0.0;
  double p = 2.0;
  GradientVariant variant = GradientVariant::SupOfExpectation;
  std::vector<double> times;
  /// Mean Jacobian per sampled time, row-major d x d.
  std::vector<std::vector<double>> mean_jacobian;
  /// E |grad X_t|^p (Frobenius) per sampled time.
  std::vector<double> moment;
  std::vector<double> moment_std_error;
  double sup_of_expectation = 0.0;
  double expectation_of_sup = 0.0;
  double expectation_of_sup_se = 0.0;
  /// Same statistic with step h/2.
  double half_step_value = 0.0;
  bool step_size_warning = false;
  double exploded_fraction = 0.0;
};

struct GradientResult {
  FlowDerivativeEstimate estimate;
  MomentReport report;
};

/// Central differences (X_t(x + h e_i) - X_t(x - h e_i)) / 2h on a shared Brownian path.
/// The report compares the chosen variant against C (e^{(1+|x|^2)^alpha} or (1+|x|^2)^gamma).
GradientResult fd_gradient(const SdeProblem& problem, const SimulationConfig& config, const Vec& x, double h,
                           double p, GradientVariant variant, double envelope_C = 1.0, double envelope_gamma = 1.0);

struct Lattice {
  std::vector<std::size_t> shape;
  double spacing = 1.0;
  Vec origin;

  std::size_t size() const;
  int dim() const { return static_cast<int>(shape.size()); }
  Vec point(std::size_t flat) const;
};

/// M_R g(x) = max over s in {0, h, 2h, ...} with s <= R of the mean of |g| over lattice
/// nodes within distance s of x. s = 0 is the single node (the limit of small balls).
std::vector<double> maximal_function(std::span<const double> values, const Lattice& lattice, double R);

struct MaximalCheck {
  std::size_t pairs_checked = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max |f(x)-f(y)| / rhs
};

/// Exhaustive check of |f(x)-f(y)| <= 2^d |x-y| (M_R|grad f|(x) + M_R|grad f|(y)) over all
/// lattice pairs with |x-y| <= R.
MaximalCheck maximal_inequality_check(const std::function<double(const Vec&)>& f,
                                      const std::function<double(const Vec&)>& grad_norm, const Lattice& lattice,
                                      double R);

}  // namespace flowlab
