#pragma once

#include "flowlab/coefficients.hpp"
#include "flowlab/integrators.hpp"

#include <string>
#include <vector>

namespace flowlab {

struct LyapunovSpec {
  double alpha = 1.0;
  double lambda = 0.0;
  /// Moment order of the polynomial branch.
  double p = 1.0;
};

struct MomentReport {
  double time = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  /// |estimate(dt) - estimate(dt/2)|; zero when the halving run is disabled.
  double bias = 0.0;
  /// Share of the estimate carried by the top 0.1% of paths.
  double tail_fraction = 0.0;
  std::size_t n_paths = 0;
  double exploded_fraction = 0.0;
  bool pass = false;
  Verdict verdict = Verdict::Fail;
  std::string note;
};

/// 2 alpha C_{alpha+1}, the smallest admissible decay rate of the exponential branch.
double exp_lambda_threshold(const SdeProblem& problem, double alpha);

/// p sup_x [2<x,b> + (2p-1)||sigma||^2] / (1+|x|^2), the smallest rate for which
/// e^{-lambda t}(1+|X_t|^2)^p is a supermartingale by Ito's formula.
double poly_lambda_threshold(const SdeProblem& problem, double p);

/// E exp{e^{-lambda t}(1+|X_t|^2)^alpha} against exp{(1+|x|^2)^alpha}.
std::vector<MomentReport> exp_moment_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                           const LyapunovSpec& spec, const std::vector<double>& times,
                                           bool estimate_bias = true);

/// E (1+|X_t|^2)^p against e^{lambda t}(1+|x|^2)^p.
std::vector<MomentReport> poly_moment_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                            double p, double lambda, const std::vector<double>& times,
                                            bool estimate_bias = true);

struct SupermartingaleReport {
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  /// Mean and standard error of f(t_{j+1}) - f(t_j) on the same paths.
  std::vector<double> increments;
  std::vector<double> increment_errors;
  double radius = 0.0;
  double exploded_fraction = 0.0;
  bool pass = false;
  Verdict verdict = Verdict::Fail;
};

/// t -> E f(t^tau_R, X_{t^tau_R}) with f(t,x) = exp{e^{-lambda t}(1+|x|^2)^alpha}.
SupermartingaleReport supermartingale_test(const SdeProblem& problem, const SimulationConfig& config, const Vec& x,
                                           const LyapunovSpec& spec, double radius, const std::vector<double>& times);

struct SteeringLevel {
  double m = 0.0;
  std::vector<double> times;
  std::vector<double> mean_sq;   // E|Y_t - y0|^2
  std::vector<double> std_errors;
  std::vector<double> bound;     // C0 e^{-mt}|x0-y0|^2 + C1/sqrt(m)
  double sup_moment = 0.0;       // E sup_t |Y_t|^2
  double sup_moment_half = 0.0;  // same on the first half of the paths
  double sup_moment_se = 0.0;
  bool sup_stable = false;
  bool bound_holds = false;
  double exploded_fraction = 0.0;
};

struct SteeringReport {
  double C0 = 1.0;
  double C1 = 0.0;
  std::vector<SteeringLevel> levels;
  bool pass = false;
  Verdict verdict = Verdict::Fail;
};

/// Field of dY = -m (Y - y0) dt + b dt + sigma dW.
CoefficientField steered_field(const CoefficientField& field, const Vec& y0, double m);

/// Fits (C0, C1) at the smallest m and checks E|Y_t - y0|^2 <= C0 e^{-mt}|x0-y0|^2 + C1/sqrt(m)
/// at the remaining m with 3 SE slack on every recorded time.
SteeringReport steering_contraction_check(const SdeProblem& problem, const SimulationConfig& config, const Vec& x0,
                                          const Vec& y0, std::vector<double> m_values);

}  // namespace flowlab
