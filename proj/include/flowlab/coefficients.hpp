#pragma once

#include "flowlab/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowlab {

/// Drift b(t,x) in R^d and diffusion sigma(t,x) in R^{d x m} of
/// dX = b dt + sigma dW.
struct CoefficientField {
  int dim = 1;
  int noise_dim = 1;
  std::function<Vec(double, const Vec&)> drift;
  std::function<Mat(double, const Vec&)> diffusion;

  Vec b(double t, const Vec& x) const { return drift(t, x); }
  Mat sigma(double t, const Vec& x) const { return diffusion(t, x); }
};

/// Constants of the local-integrability and super-linear growth hypotheses.
struct GrowthProfile {
  double alpha = 1.0;
  double alpha_prime = 0.5;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double gamma3 = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double R0 = 1.0;
  /// kappa -> C_kappa of the coercivity inequality.
  std::function<double(double)> coercivity_constant;
  /// (kappa, t, x) -> F_kappa(t,x) >= 0 of the monotonicity inequality.
  std::function<double(double, double, const Vec&)> monotonicity_majorant;
  std::string note;

  void validate() const;
};

struct SdeProblem {
  CoefficientField field;
  std::optional<GrowthProfile> growth;
  std::string preset_id;
  std::string description;
};

struct AuditReport {
  std::string quantity_name;
  /// Evaluation points (or concatenated pairs) in evaluation order.
  std::vector<std::vector<double>> grid;
  double worst_value = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> warnings;
};

/// Absolute and relative tolerance applied to every audit comparison.
inline constexpr double kAuditAbsTol = 1e-9;
inline constexpr double kAuditRelTol = 1e-9;

/// Builds a preset: "example1(beta)", "bm(d)", "ou(d)", "step-drift-1d",
/// "degenerate-example1(gamma)". Throws Error{PresetNotFound} otherwise.
SdeProblem preset(const std::string& name);

struct PresetInfo {
  std::string id;
  std::string summary;
};

/// Preset families in stable display order.
std::vector<PresetInfo> preset_catalog();

/// sup over |x| <= radius of ratio(x), scanning each coordinate axis and the
/// main diagonal in both directions, then refining by golden-section search.
double maximize_radial(int dim, const std::function<double(const Vec&)>& ratio, double radius = 1e3);

/// Numerically maximized C_kappa = sup (<x,b> + kappa (1+|x|^2)^alpha ||sigma||^2) / (1+|x|^2).
double coercivity_constant(const CoefficientField& field, double alpha, double kappa, double radius = 1e3);

/// Wraps a CoefficientField-dependent C_kappa computation in a thread-safe memo.
std::function<double(double)> memoized_coercivity(const CoefficientField& field, double alpha);

/// Uniform tensor grid on [-half_width, half_width]^d with about `target_points` nodes.
std::vector<Vec> default_audit_grid(int dim, double half_width = 10.0, std::size_t target_points = 1000);

/// All pairs (i<j) of a coarser default grid.
std::vector<std::pair<Vec, Vec>> default_audit_pairs(int dim, double half_width = 10.0, std::size_t target_points = 100);

AuditReport audit_coercivity(const SdeProblem& problem, double kappa, std::span<const Vec> grid,
                             std::span<const double> times = {});
AuditReport audit_monotonicity(const SdeProblem& problem, double kappa,
                               std::span<const std::pair<Vec, Vec>> pairs, std::span<const double> times = {});
AuditReport audit_ellipticity(const SdeProblem& problem, std::span<const Vec> grid, std::span<const double> times = {});
AuditReport audit_growth(const SdeProblem& problem, std::span<const Vec> grid, std::span<const double> times = {});

/// Midpoint-type convexity check F(theta x + (1-theta) y) <= theta F(x) + (1-theta) F(y)
/// used for convex monotonicity majorants.
AuditReport audit_convexity(const std::function<double(const Vec&)>& F, std::span<const std::pair<Vec, Vec>> pairs,
                            std::span<const double> thetas);

/// Smallest singular value in the sense inf_{|xi|=1} |sigma xi|.
double smallest_singular_value(const Mat& sigma);

}  // namespace flowlab

namespace flowlab {

/// User problem given by expression strings (see Expression for the grammar).
struct ExpressionProblemSpec {
  int dim = 1;
  int noise_dim = 1;
  std::vector<std::string> drift;      // dim entries
  std::vector<std::string> diffusion;  // dim * noise_dim entries, row-major
  /// Optional growth metadata; C_kappa is computed numerically and F_kappa
  /// comes from `majorant`, which may reference kappa.
  std::optional<GrowthProfile> growth;
  std::string majorant = "0";
  std::string name = "custom";
};

SdeProblem expression_problem(const ExpressionProblemSpec& spec);

}  // namespace flowlab
