#include "flowlab/coefficients.hpp"
#include "flowlab/expression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <regex>

namespace flowlab {

void GrowthProfile::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "growth: alpha must lie in [0,1]");
  if (alpha_prime < 0.0 || (alpha > 0.0 && !(alpha_prime < alpha)))
    throw Error(ErrorCode::InvalidConfig, "growth: alpha_prime must lie in [0, alpha)");
  if (!(R0 >= 1.0)) throw Error(ErrorCode::InvalidConfig, "growth: R0 must be >= 1");
  if (!(C1 > 0.0 && C2 > 0.0 && C3 > 0.0)) throw Error(ErrorCode::InvalidConfig, "growth: C1, C2, C3 must be positive");
  if (!(gamma1 > 0.0 && gamma2 > 0.0 && gamma3 > 0.0))
    throw Error(ErrorCode::InvalidConfig, "growth: gamma exponents must be positive");
  if (!coercivity_constant || !monotonicity_majorant)
    throw Error(ErrorCode::InvalidConfig, "growth: coercivity constant and monotonicity majorant are required");
}

double smallest_singular_value(const Mat& sigma) {
  if (sigma.cols() > sigma.rows()) return 0.0;
  Eigen::JacobiSVD<Mat> svd(sigma);
  const auto& s = svd.singularValues();
  return s.size() == 0 ? 0.0 : s.minCoeff();
}

double maximize_radial(int dim, const std::function<double(const Vec&)>& ratio, double radius) {
  std::vector<Vec> directions;
  for (int i = 0; i < dim; ++i) {
    Vec e = Vec::Zero(dim);
    e(i) = 1.0;
    directions.push_back(e);
    directions.push_back(-e);
  }
  if (dim > 1) {
    const Vec diag = Vec::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    directions.push_back(diag);
    directions.push_back(-diag);
  }

  // Linear near the origin, geometric beyond.
  std::vector<double> radii;
  const double inner = std::min(radius, 10.0);
  constexpr int kInner = 2000;
  for (int k = 0; k <= kInner; ++k) radii.push_back(inner * k / kInner);
  if (radius > inner) {
    constexpr int kOuter = 1000;
    const double q = std::pow(radius / inner, 1.0 / kOuter);
    double r = inner;
    for (int k = 1; k <= kOuter; ++k) {
      r *= q;
      radii.push_back(std::min(r, radius));
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (const Vec& dir : directions) {
    auto f = [&](double r) {
      const double v = ratio(r * dir);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };
    std::size_t arg = 0;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const double v = f(radii[k]);
      if (v > top) {
        top = v;
        arg = k;
      }
    }
    double lo = radii[arg == 0 ? 0 : arg - 1];
    double hi = radii[std::min(arg + 1, radii.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
    double fa = f(a), fb = f(b);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
      if (fa < fb) {
        lo = a;
        a = b;
        fa = fb;
        b = lo + inv_phi * (hi - lo);
        fb = f(b);
      } else {
        hi = b;
        b = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = f(a);
      }
    }
    best = std::max({best, top, fa, fb});
  }
  return best;
}

double coercivity_constant(const CoefficientField& field, double alpha, double kappa, double radius) {
  auto ratio = [&](const Vec& x) {
    const double w = 1.0 + x.squaredNorm();
    const double s = field.sigma(0.0, x).squaredNorm();
    return (x.dot(field.b(0.0, x)) + kappa * std::pow(w, alpha) * s) / w;
  };
  return maximize_radial(field.dim, ratio, radius);
}

std::function<double(double)> memoized_coercivity(const CoefficientField& field, double alpha) {
  struct Memo {
    std::mutex mutex;
    std::map<double, double> values;
  };
  auto memo = std::make_shared<Memo>();
  return [memo, field, alpha](double kappa) {
    {
      std::scoped_lock lock(memo->mutex);
      if (auto it = memo->values.find(kappa); it != memo->values.end()) return it->second;
    }
    const double c = coercivity_constant(field, alpha, kappa);
    std::scoped_lock lock(memo->mutex);
    return memo->values.emplace(kappa, c).first->second;
  };
}

namespace {

Mat identity(int d) { return Mat::Identity(d, d); }

Vec example1_drift(const Vec& x) {
  const double v = x(0);
  const double v5 = v * v * v * v * v;
  return scalar_vec(v < 0.0 ? 1.0 - v5 : -(1.0 + v5));
}

// sup_{0<=z<=r} of a unimodal derivative profile h peaking at z_peak.
double running_sup(const std::function<double(double)>& h, double z_peak, double r) {
  return h(std::min(r, z_peak));
}

SdeProblem make_example1(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw Error(ErrorCode::PresetNotFound, "example1: beta must lie in [0,1)");
  SdeProblem p;
  p.field.dim = 1;
  p.field.noise_dim = 1;
  p.field.drift = [](double, const Vec& x) { return example1_drift(x); };
  p.field.diffusion = [beta](double, const Vec& x) {
    Mat s(1, 1);
    s(0, 0) = std::pow(1.0 + x(0) * x(0), beta);
    return s;
  };

  GrowthProfile g;
  g.alpha = 1.0;
  g.alpha_prime = std::max(0.9, beta);
  g.C1 = 1.0;
  g.C2 = 8.0;
  g.C3 = std::max(4.0 * beta * beta, 1e-3);
  g.R0 = 1.0;
  g.coercivity_constant = memoized_coercivity(p.field, g.alpha);
  // |sigma'(z)| = 2 beta z (1+z^2)^(beta-1); increasing for all z when beta >= 1/2.
  auto h = [beta](double z) { return 2.0 * beta * z * std::pow(1.0 + z * z, beta - 1.0); };
  const double z_peak = beta < 0.5 ? 1.0 / std::sqrt(1.0 - 2.0 * beta) : std::numeric_limits<double>::infinity();
  g.monotonicity_majorant = [h, z_peak](double kappa, double, const Vec& x) {
    const double s = running_sup(h, z_peak, std::abs(x(0)));
    return kappa * s * s;
  };
  g.note = "F_kappa = kappa * (sup_{|z|<=|x|} |sigma'(z)|)^2; q' > d+1 holds since F_kappa is locally bounded";
  p.growth = std::move(g);

  char buf[64];
  std::snprintf(buf, sizeof buf, "example1(%g)", beta);
  p.preset_id = buf;
  p.description = "quintic one-sided drift with sign jump at 0, diffusion (1+x^2)^beta";
  return p;
}

SdeProblem make_degenerate(double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::PresetNotFound, "degenerate-example1: gamma must be positive");
  SdeProblem p;
  p.field.dim = 1;
  p.field.noise_dim = 1;
  p.field.drift = [](double, const Vec& x) { return example1_drift(x); };
  p.field.diffusion = [gamma](double, const Vec& x) {
    Mat s(1, 1);
    s(0, 0) = std::pow(1.0 + x(0) * x(0), -gamma);
    return s;
  };

  GrowthProfile g;
  g.alpha = 1.0;
  g.alpha_prime = 0.5;
  g.C1 = std::max(1.0, gamma);
  g.C2 = 2.0;
  g.R0 = 1.0;
  auto h = [gamma](double z) { return 2.0 * gamma * z * std::pow(1.0 + z * z, -gamma - 1.0); };
  const double z_peak = 1.0 / std::sqrt(2.0 * gamma + 1.0);
  const double h_max = h(z_peak);
  g.C3 = std::max(h_max * h_max, 1e-3);
  g.coercivity_constant = memoized_coercivity(p.field, g.alpha);
  g.monotonicity_majorant = [h, z_peak](double kappa, double, const Vec& x) {
    const double s = running_sup(h, z_peak, std::abs(x(0)));
    return kappa * s * s;
  };
  g.note = "diffusion decays polynomially; ellipticity holds through the exponential envelope";
  p.growth = std::move(g);

  char buf[64];
  std::snprintf(buf, sizeof buf, "degenerate-example1(%g)", gamma);
  p.preset_id = buf;
  p.description = "example1 drift with decaying diffusion (1+x^2)^(-gamma)";
  return p;
}

SdeProblem make_linear(int d, bool ou) {
  if (d < 1 || d > kMaxDim)
    throw Error(ErrorCode::PresetNotFound, "dimension must lie in [1," + std::to_string(kMaxDim) + "]");
  SdeProblem p;
  p.field.dim = d;
  p.field.noise_dim = d;
  if (ou) p.field.drift = [](double, const Vec& x) -> Vec { return -x; };
  else p.field.drift = [d](double, const Vec&) -> Vec { return Vec::Zero(d); };
  p.field.diffusion = [d](double, const Vec&) { return identity(d); };

  GrowthProfile g;
  g.alpha = 1.0;
  g.alpha_prime = 0.5;
  g.C1 = 1.0;
  g.C2 = 1.0;
  g.C3 = 1.0;
  g.R0 = 1.0;
  g.coercivity_constant = memoized_coercivity(p.field, g.alpha);
  g.monotonicity_majorant = [](double, double, const Vec&) { return 0.0; };
  p.growth = std::move(g);

  p.preset_id = std::string(ou ? "ou(" : "bm(") + std::to_string(d) + ")";
  p.description = ou ? "Ornstein-Uhlenbeck dX = -X dt + dW" : "standard Brownian motion";
  return p;
}

SdeProblem make_step_drift() {
  SdeProblem p;
  p.field.dim = 1;
  p.field.noise_dim = 1;
  p.field.drift = [](double, const Vec& x) {
    const double v = x(0);
    const double s = static_cast<double>((v > 0.0) - (v < 0.0));
    return scalar_vec(std::abs(v) <= 2.0 ? -s : 0.0);
  };
  p.field.diffusion = [](double, const Vec&) { return identity(1); };
  p.preset_id = "step-drift-1d";
  p.description = "bounded discontinuous drift -sign(x) on |x|<=2, unit diffusion";
  return p;
}

double parse_arg(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::PresetNotFound, "unknown preset '" + name + "'");
  }
}

}  // namespace

SdeProblem preset(const std::string& name) {
  static const std::regex call(R"(^\s*([a-z0-9\-]+)\s*\(\s*([^)]*?)\s*\)\s*$)");
  std::smatch m;
  if (name == "step-drift-1d") return make_step_drift();
  if (std::regex_match(name, m, call)) {
    const std::string family = m[1];
    const std::string arg = m[2];
    if (family == "example1") return make_example1(parse_arg(name, arg));
    if (family == "degenerate-example1") return make_degenerate(parse_arg(name, arg));
    if (family == "bm" || family == "ou") {
      const double d = parse_arg(name, arg);
      if (d != std::floor(d)) throw Error(ErrorCode::PresetNotFound, "unknown preset '" + name + "'");
      return make_linear(static_cast<int>(d), family == "ou");
    }
  }
  throw Error(ErrorCode::PresetNotFound, "unknown preset '" + name + "'");
}

std::vector<PresetInfo> preset_catalog() {
  return {
      {"example1(beta)", "b = (1-x^5)1{x<0} - (1+x^5)1{x>=0}, sigma = (1+x^2)^beta, beta in [0,1)"},
      {"bm(d)", "b = 0, sigma = I_d"},
      {"ou(d)", "b = -x, sigma = I_d"},
      {"step-drift-1d", "b = -sign(x) 1{|x|<=2}, sigma = 1"},
      {"degenerate-example1(gamma)", "example1 drift, sigma = (1+x^2)^(-gamma), gamma > 0"},
  };
}

std::vector<Vec> default_audit_grid(int dim, double half_width, std::size_t target_points) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::InvalidArgument, "audit grid: bad dimension");
  const auto per_axis = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(target_points), 1.0 / dim))));
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= per_axis;
  std::vector<Vec> grid;
  grid.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    Vec x(dim);
    std::size_t rest = k;
    for (int i = dim - 1; i >= 0; --i) {
      const auto j = rest % per_axis;
      rest /= per_axis;
      x(i) = -half_width + 2.0 * half_width * static_cast<double>(j) / static_cast<double>(per_axis - 1);
    }
    grid.push_back(x);
  }
  return grid;
}

std::vector<std::pair<Vec, Vec>> default_audit_pairs(int dim, double half_width, std::size_t target_points) {
  const auto pts = default_audit_grid(dim, half_width, target_points);
  std::vector<std::pair<Vec, Vec>> pairs;
  pairs.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) pairs.emplace_back(pts[i], pts[j]);
  return pairs;
}

namespace {

const GrowthProfile& require_growth(const SdeProblem& problem, const char* audit) {
  if (!problem.growth)
    throw Error(ErrorCode::AuditUnavailable,
                std::string(audit) + ": problem '" + problem.preset_id + "' has no growth metadata");
  return *problem.growth;
}

std::vector<double> to_row(const Vec& x) { return {x.data(), x.data() + x.size()}; }

std::vector<double> to_row(const Vec& x, const Vec& y) {
  auto row = to_row(x);
  row.insert(row.end(), y.data(), y.data() + y.size());
  return row;
}

std::span<const double> times_or_zero(std::span<const double> times) {
  static const double zero = 0.0;
  return times.empty() ? std::span<const double>(&zero, 1) : times;
}

// Accumulates excess = lhs - rhs and the magnitude scale used for the relative tolerance.
struct Tally {
  double worst = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  bool nonfinite = false;

  void add(double excess, double magnitude) {
    if (!std::isfinite(excess)) {
      nonfinite = true;
      return;
    }
    worst = std::max(worst, excess);
    if (std::isfinite(magnitude)) scale = std::max(scale, magnitude);
  }

  void finish(AuditReport& r) const {
    r.bound = 0.0;
    r.worst_value = worst;
    r.tolerance = kAuditAbsTol + kAuditRelTol * scale;
    r.margin = r.bound + r.tolerance - r.worst_value;
    r.pass = !nonfinite && r.worst_value <= r.bound + r.tolerance;
    if (nonfinite) r.warnings.push_back("non-finite value encountered; audit fails");
  }
};

void check_grid(std::span<const Vec> grid, int dim) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "audit: empty grid");
  for (const Vec& x : grid)
    if (x.size() != dim) throw Error(ErrorCode::InvalidArgument, "audit: grid point dimension mismatch");
}

}  // namespace

AuditReport audit_coercivity(const SdeProblem& problem, double kappa, std::span<const Vec> grid,
                             std::span<const double> times) {
  const GrowthProfile& g = require_growth(problem, "audit_coercivity");
  check_grid(grid, problem.field.dim);
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "audit_coercivity: kappa must be positive");
  AuditReport r;
  r.quantity_name = "coercivity";
  const double ck = g.coercivity_constant(kappa);
  Tally tally;
  for (double t : times_or_zero(times)) {
    for (const Vec& x : grid) {
      const double w = 1.0 + x.squaredNorm();
      const double inner = x.dot(problem.field.b(t, x));
      const double diff = kappa * std::pow(w, g.alpha) * problem.field.sigma(t, x).squaredNorm();
      const double rhs = ck * w;
      tally.add(inner + diff - rhs, std::abs(inner) + diff + std::abs(rhs));
      r.grid.push_back(to_row(x));
    }
  }
  tally.finish(r);
  return r;
}

AuditReport audit_monotonicity(const SdeProblem& problem, double kappa, std::span<const std::pair<Vec, Vec>> pairs,
                               std::span<const double> times) {
  const GrowthProfile& g = require_growth(problem, "audit_monotonicity");
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "audit_monotonicity: empty pair set");
  if (kappa < 0.0) throw Error(ErrorCode::InvalidArgument, "audit_monotonicity: kappa must be nonnegative");
  AuditReport r;
  r.quantity_name = "monotonicity";
  Tally tally;
  std::size_t coincident = 0;
  for (double t : times_or_zero(times)) {
    for (const auto& [x, y] : pairs) {
      if (x.size() != problem.field.dim || y.size() != problem.field.dim)
        throw Error(ErrorCode::InvalidArgument, "audit_monotonicity: pair dimension mismatch");
      r.grid.push_back(to_row(x, y));
      const Vec dx = x - y;
      if (dx.squaredNorm() == 0.0) {
        ++coincident;
        continue;
      }
      const double inner = dx.dot(problem.field.b(t, x) - problem.field.b(t, y));
      const double diff = kappa * (problem.field.sigma(t, x) - problem.field.sigma(t, y)).squaredNorm();
      const double fx = g.monotonicity_majorant(kappa, t, x);
      const double fy = g.monotonicity_majorant(kappa, t, y);
      if (fx < 0.0 || fy < 0.0) r.warnings.push_back("negative monotonicity majorant");
      const double rhs = dx.squaredNorm() * (fx + fy);
      tally.add(inner + diff - rhs, std::abs(inner) + diff + rhs);
    }
  }
  if (coincident > 0)
    r.warnings.push_back(std::to_string(coincident) + " coincident pair(s) skipped (0/0 = 0 convention)");

  // Tail bound on F_kappa outside the ball of radius R0. C3 is a kappa-free constant,
  // so the comparison is scaled by (1 + kappa).
  std::vector<Vec> tail_points;
  for (const auto& [x, y] : pairs) {
    for (const Vec* v : {&x, &y})
      if (v->norm() >= g.R0) tail_points.push_back(*v);
  }
  for (double t : times_or_zero(times)) {
    for (const Vec& x : tail_points) {
      const double w = 1.0 + x.squaredNorm();
      const double env = g.alpha > 0.0 ? std::pow(w, g.alpha_prime) : std::log(w);
      const double rhs = (1.0 + kappa) * g.C3 * env;
      const double f = g.monotonicity_majorant(kappa, t, x);
      tally.add(f - rhs, std::abs(f) + rhs);
    }
  }
  if (tally.worst == -std::numeric_limits<double>::infinity()) tally.worst = 0.0;
  tally.finish(r);
  return r;
}

AuditReport audit_ellipticity(const SdeProblem& problem, std::span<const Vec> grid, std::span<const double> times) {
  const GrowthProfile& g = require_growth(problem, "audit_ellipticity");
  check_grid(grid, problem.field.dim);
  AuditReport r;
  r.quantity_name = "ellipticity";
  Tally tally;
  for (double t : times_or_zero(times)) {
    for (const Vec& x : grid) {
      const double w = 1.0 + x.squaredNorm();
      const double env = g.alpha > 0.0 ? std::exp(-g.C1 * std::pow(w, g.alpha_prime))
                                       : g.C1 * std::pow(w, -g.gamma1);
      const double smin = smallest_singular_value(problem.field.sigma(t, x));
      tally.add(env - smin, env + smin);
      r.grid.push_back(to_row(x));
    }
  }
  tally.finish(r);
  return r;
}

AuditReport audit_growth(const SdeProblem& problem, std::span<const Vec> grid, std::span<const double> times) {
  const GrowthProfile& g = require_growth(problem, "audit_growth");
  check_grid(grid, problem.field.dim);
  AuditReport r;
  r.quantity_name = "growth";
  Tally tally;
  for (double t : times_or_zero(times)) {
    for (const Vec& x : grid) {
      const double w = 1.0 + x.squaredNorm();
      const double lhs = problem.field.b(t, x).norm() + problem.field.sigma(t, x).norm();
      const double cap = g.alpha > 0.0 ? std::exp(g.C2 * std::pow(w, g.alpha_prime)) : g.C2 * std::pow(w, g.gamma2);
      tally.add(lhs - cap, lhs + cap);
      r.grid.push_back(to_row(x));
    }
  }
  tally.finish(r);
  return r;
}

AuditReport audit_convexity(const std::function<double(const Vec&)>& F, std::span<const std::pair<Vec, Vec>> pairs,
                            std::span<const double> thetas) {
  if (pairs.empty() || thetas.empty()) throw Error(ErrorCode::InvalidArgument, "audit_convexity: empty input");
  AuditReport r;
  r.quantity_name = "convexity";
  Tally tally;
  for (const auto& [x, y] : pairs) {
    r.grid.push_back(to_row(x, y));
    const double fx = F(x), fy = F(y);
    for (double th : thetas) {
      const double mid = F(th * x + (1.0 - th) * y);
      const double chord = th * fx + (1.0 - th) * fy;
      tally.add(mid - chord, std::abs(mid) + std::abs(chord));
    }
  }
  tally.finish(r);
  return r;
}

}  // namespace flowlab

namespace flowlab {

SdeProblem expression_problem(const ExpressionProblemSpec& spec) {
  if (spec.dim < 1 || spec.dim > kMaxDim || spec.noise_dim < 1 || spec.noise_dim > kMaxDim)
    throw Error(ErrorCode::InvalidConfig, "custom problem: dimensions must lie in [1, " + std::to_string(kMaxDim) + "]");
  const auto d = static_cast<std::size_t>(spec.dim), m = static_cast<std::size_t>(spec.noise_dim);
  if (spec.drift.size() != d) throw Error(ErrorCode::InvalidConfig, "custom problem: drift needs " + std::to_string(d) + " entries");
  if (spec.diffusion.size() != d * m)
    throw Error(ErrorCode::InvalidConfig, "custom problem: diffusion needs " + std::to_string(d * m) + " entries");
  auto compile = [&](const std::string& s) {
    Expression e = Expression::parse(s);
    if (e.max_variable() > spec.dim)
      throw Error(ErrorCode::InvalidConfig, "custom problem: '" + s + "' references a coordinate beyond dimension " +
                                                std::to_string(spec.dim));
    return e;
  };
  std::vector<Expression> b, s;
  for (const auto& e : spec.drift) b.push_back(compile(e));
  for (const auto& e : spec.diffusion) s.push_back(compile(e));

  SdeProblem p;
  p.preset_id = spec.name;
  p.description = "custom expression problem";
  p.field.dim = spec.dim;
  p.field.noise_dim = spec.noise_dim;
  p.field.drift = [b, d](double t, const Vec& x) {
    Vec v(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) v(static_cast<Eigen::Index>(i)) = b[i].eval(t, x);
    return v;
  };
  p.field.diffusion = [s, d, m](double t, const Vec& x) {
    Mat a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < m; ++j)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[i * m + j].eval(t, x);
    return a;
  };
  if (spec.growth) {
    GrowthProfile g = *spec.growth;
    const Expression F = compile(spec.majorant);
    g.monotonicity_majorant = [F](double kappa, double t, const Vec& x) { return F.eval(t, x, kappa); };
    g.coercivity_constant = memoized_coercivity(p.field, g.alpha);
    g.validate();
    p.growth = std::move(g);
  }
  return p;
}

}  // namespace flowlab
