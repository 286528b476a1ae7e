#include "flowlab/experiment.hpp"

#include "flowlab/coefficients.hpp"
#include "flowlab/expression.hpp"
#include "flowlab/flow_regularity.hpp"
#include "flowlab/integrators.hpp"
#include "flowlab/lyapunov.hpp"
#include "flowlab/markov_stats.hpp"
#include "flowlab/occupation.hpp"
#include "flowlab/stats.hpp"
#include "flowlab/svg.hpp"
#include "flowlab/zvonkin.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace flowlab {

namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "config field '" + path + "': " + what);
}

// Object view that rejects unknown keys on finish().
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& req(const std::string& key) {
    const json* v = get(key);
    if (!v) config_error(at(key), "required");
    return *v;
  }

  double num(const std::string& key, double fallback) {
    const json* v = get(key);
    return v ? as_num(*v, at(key)) : fallback;
  }
  double num(const std::string& key) { return as_num(req(key), at(key)); }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer() || v->get<long long>() < 0) config_error(at(key), "expected a nonnegative integer");
    return v->get<std::size_t>();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) config_error(at(key), "expected a string");
    return v->get<std::string>();
  }
  std::string str(const std::string& key) {
    const json& v = req(key);
    if (!v.is_string()) config_error(at(key), "expected a string");
    return v.get<std::string>();
  }

  bool flag(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) config_error(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::vector<double> nums(const std::string& key, std::vector<double> fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array()) config_error(at(key), "expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_num((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strs(const std::string& key, std::vector<std::string> fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (v->is_string()) return {v->get<std::string>()};
    if (!v->is_array()) config_error(at(key), "expected a string or an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) config_error(at(key), "expected strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Vec vec(const std::string& key, int dim) { return as_vec(req(key), at(key), dim); }
  Vec vec(const std::string& key, int dim, const Vec& fallback) {
    const json* v = get(key);
    return v ? as_vec(*v, at(key), dim) : fallback;
  }

  // A list of points; a bare number or a flat numeric list means 1-D points.
  std::vector<Vec> vecs(const std::string& key, int dim, std::vector<Vec> fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    return as_vecs(*v, at(key), dim);
  }
  std::vector<Vec> vecs(const std::string& key, int dim) { return as_vecs(req(key), at(key), dim); }

  Obj sub(const std::string& key) { return Obj(req(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) config_error(at(it.key()), "unknown field");
  }

  static double as_num(const json& v, const std::string& path) {
    if (!v.is_number()) config_error(path, "expected a number");
    return v.get<double>();
  }

  static Vec as_vec(const json& v, const std::string& path, int dim) {
    if (v.is_number()) {
      if (dim != 1) config_error(path, "expected a point with " + std::to_string(dim) + " coordinates");
      return scalar_vec(v.get<double>());
    }
    if (!v.is_array() || static_cast<int>(v.size()) != dim)
      config_error(path, "expected a point with " + std::to_string(dim) + " coordinates");
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x(i) = as_num(v[static_cast<std::size_t>(i)], path);
    return x;
  }

  static std::vector<Vec> as_vecs(const json& v, const std::string& path, int dim) {
    if (v.is_number()) return {as_vec(v, path, dim)};
    if (!v.is_array()) config_error(path, "expected a list of points");
    std::vector<Vec> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_vec(v[i], path + "[" + std::to_string(i) + "]", dim));
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json to_json(const Vec& x) {
  json a = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x(i));
  return a;
}

// Non-finite numbers become strings so that they survive the round trip.
json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

double from_num(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string csv_num(double v) { return fmt("%.17g", v); }

std::string point_str(const Vec& x) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + fmt("%g", x(i));
  return s + ")";
}

json moment_json(const MomentReport& r) {
  return {{"time", num(r.time)},         {"estimate", num(r.estimate)},
          {"std_error", num(r.std_error)}, {"bound", num(r.bound)},
          {"bias", num(r.bias)},           {"tail_fraction", num(r.tail_fraction)},
          {"n_paths", r.n_paths},          {"exploded_fraction", num(r.exploded_fraction)},
          {"pass", r.pass},                {"verdict", to_string(r.verdict)},
          {"note", r.note}};
}

struct Context {
  SdeProblem problem;
  SimulationConfig sim;
  json results = json::array();
  json series = json::array();
  std::map<std::string, std::string> files;
  std::vector<std::string> summary;
  Verdict verdict = Verdict::Pass;

  void add(json result, Verdict v, const std::string& line) {
    result["verdict"] = to_string(v);
    results.push_back(std::move(result));
    verdict = combine(verdict, v);
    summary.push_back(std::string("[") + to_string(v) + "] " + line);
  }

  void plot(const std::string& file, const Plot& p) {
    json s = json::array();
    for (const auto& ps : p.series)
      s.push_back({{"name", ps.name}, {"x", nums(ps.x)}, {"y", nums(ps.y)}, {"lo", nums(ps.lo)}, {"hi", nums(ps.hi)}});
    series.push_back({{"file", file}, {"title", p.title}, {"x_label", p.x_label}, {"y_label", p.y_label}, {"series", s}});
  }
};

SdeProblem parse_problem(Obj o) {
  SdeProblem p;
  if (o.has("preset") == o.has("custom")) config_error(o.at("preset"), "give exactly one of 'preset' or 'custom'");
  if (o.has("preset")) {
    p = preset(o.str("preset"));
  } else {
    Obj c = o.sub("custom");
    ExpressionProblemSpec s;
    s.dim = static_cast<int>(c.count("dim", 1));
    s.noise_dim = static_cast<int>(c.count("noise_dim", static_cast<std::size_t>(s.dim)));
    s.drift = c.strs("drift", {});
    s.diffusion = c.strs("diffusion", {});
    s.name = c.str("name", "custom");
    if (c.has("growth")) {
      Obj g = c.sub("growth");
      GrowthProfile gp;
      gp.alpha = g.num("alpha", gp.alpha);
      gp.alpha_prime = g.num("alpha_prime", gp.alpha_prime);
      gp.gamma1 = g.num("gamma1", gp.gamma1);
      gp.gamma2 = g.num("gamma2", gp.gamma2);
      gp.gamma3 = g.num("gamma3", gp.gamma3);
      gp.C1 = g.num("C1", gp.C1);
      gp.C2 = g.num("C2", gp.C2);
      gp.C3 = g.num("C3", gp.C3);
      gp.R0 = g.num("R0", gp.R0);
      s.majorant = g.str("majorant", "0");
      g.finish();
      s.growth = gp;
    }
    c.finish();
    p = expression_problem(s);
  }
  o.finish();
  return p;
}

SimulationConfig parse_simulation(const json* j, const RunOverrides& ov) {
  SimulationConfig c;
  if (j) {
    Obj o(*j, "simulation");
    c.scheme = scheme_from_string(o.str("scheme", to_string(c.scheme)));
    c.dt = o.num("dt", c.dt);
    c.horizon = o.num("horizon", c.horizon);
    c.n_paths = o.count("paths", c.n_paths);
    c.seed = o.count("seed", static_cast<std::size_t>(c.seed));
    c.explosion_cap = o.num("explosion_cap", c.explosion_cap);
    c.record_stride = o.count("record_stride", c.record_stride);
    c.stream_offset = o.count("stream_offset", static_cast<std::size_t>(c.stream_offset));
    o.finish();
  }
  if (ov.seed) c.seed = *ov.seed;
  if (ov.dt) c.dt = *ov.dt;
  if (ov.paths) c.n_paths = *ov.paths;
  try {
    c.validate();
  } catch (const Error& e) {
    config_error("simulation", e.what());
  }
  return c;
}

json sim_json(const SimulationConfig& c) {
  return {{"scheme", to_string(c.scheme)}, {"dt", c.dt},
          {"horizon", c.horizon},          {"paths", c.n_paths},
          {"seed", c.seed},                {"explosion_cap", c.explosion_cap},
          {"record_stride", c.record_stride}, {"stream_offset", c.stream_offset}};
}

SpaceTimeFn space_time(const std::string& src, int dim, const std::string& path) {
  const Expression e = Expression::parse(src);
  if (e.max_variable() > dim) config_error(path, "references a coordinate beyond dimension " + std::to_string(dim));
  return [e](double t, const Vec& x) { return e.eval(t, x); };
}

// ---------------------------------------------------------------- audit

void run_audit(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const double kappa = p.num("kappa", 1.0);
  const double hw = p.num("half_width", 10.0);
  const auto points = p.count("points", 1000);
  const auto pair_points = p.count("pair_points", 100);
  const auto times = p.nums("times", {0.0});
  const auto checks = p.strs("checks", {"coercivity", "monotonicity", "ellipticity", "growth"});
  p.finish();
  const auto grid = default_audit_grid(d, hw, points);
  const auto pairs = default_audit_pairs(d, hw, pair_points);
  std::string table = "quantity,worst_value,bound,margin,tolerance,pass\n";
  for (const auto& name : checks) {
    AuditReport r;
    if (name == "coercivity") r = audit_coercivity(ctx.problem, kappa, grid, times);
    else if (name == "monotonicity") r = audit_monotonicity(ctx.problem, kappa, pairs, times);
    else if (name == "ellipticity") r = audit_ellipticity(ctx.problem, grid, times);
    else if (name == "growth") r = audit_growth(ctx.problem, grid, times);
    else config_error("params.checks", "unknown audit '" + name + "'");
    json j = {{"check", "audit"},
              {"quantity", r.quantity_name},
              {"kappa", kappa},
              {"grid", {{"half_width", hw}, {"points", name == "monotonicity" ? pairs.size() : grid.size()}}},
              {"worst_value", num(r.worst_value)},
              {"bound", num(r.bound)},
              {"margin", num(r.margin)},
              {"tolerance", num(r.tolerance)},
              {"pass", r.pass},
              {"warnings", r.warnings}};
    table += r.quantity_name + "," + csv_num(r.worst_value) + "," + csv_num(r.bound) + "," + csv_num(r.margin) + "," +
             csv_num(r.tolerance) + "," + (r.pass ? "true" : "false") + "\n";
    ctx.add(std::move(j), r.pass ? Verdict::Pass : Verdict::Fail,
            r.quantity_name + " worst " + fmt("%.6g", r.worst_value) + " margin " + fmt("%.6g", r.margin));
  }
  ctx.files["audits.csv"] = table;
}

// ------------------------------------------------------------- simulate

void run_simulate(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const Vec x0 = p.vec("x0", d, Vec::Zero(d));
  const auto schemes = p.strs("schemes", {to_string(ctx.sim.scheme)});
  std::map<std::string, std::string> expect;
  if (p.has("expect")) {
    const json& e = p.req("expect");
    if (!e.is_object()) config_error("params.expect", "expected an object of scheme -> \"explodes\" | \"bounded\"");
    for (auto it = e.begin(); it != e.end(); ++it) {
      if (!it->is_string() || (*it != "explodes" && *it != "bounded"))
        config_error("params.expect." + it.key(), "expected \"explodes\" or \"bounded\"");
      expect[it.key()] = it->get<std::string>();
    }
  }
  const auto samples = std::max<std::size_t>(1, p.count("samples", 50));
  const bool write_paths = p.flag("write_paths", false);
  p.finish();

  Plot plot{"second moment", "t", "E|X_t|^2", {}};
  std::string table = "scheme,coordinate,mean,std_error,variance,exploded_fraction\n";
  for (const auto& name : schemes) {
    SimulationConfig c = ctx.sim;
    c.scheme = scheme_from_string(name);
    const TimeGrid grid(c.dt, c.horizon);
    const std::size_t steps = grid.steps();
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j <= samples; ++j) {
      const std::size_t k = static_cast<std::size_t>(std::llround(static_cast<double>(j) * steps / samples));
      if (idx.empty() || idx.back() != k) idx.push_back(k);
    }
    const std::size_t nb = block_count(c.n_paths), ns = idx.size();
    std::vector<double> s1(nb * ns, 0.0), s2(nb * ns, 0.0), live(nb * ns, 0.0);
    std::vector<double> xs(nb * static_cast<std::size_t>(d), 0.0), xs2(nb * static_cast<std::size_t>(d), 0.0);
    std::vector<double> xlive(nb, 0.0);
    const auto status = run_paths(ctx.problem.field, c, x0, [&](std::size_t path, const StepView& v) {
      if (v.status[0].terminated()) return;
      const std::size_t b = path / kPathBlock;
      const auto it = std::lower_bound(idx.begin(), idx.end(), v.step);
      if (it != idx.end() && *it == v.step) {
        const std::size_t j = static_cast<std::size_t>(it - idx.begin());
        const double q = v.states[0].squaredNorm();
        s1[b * ns + j] += q;
        s2[b * ns + j] += q * q;
        live[b * ns + j] += 1.0;
      }
      if (!v.increment) {
        for (int i = 0; i < d; ++i) {
          xs[b * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] += v.states[0](i);
          xs2[b * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] += v.states[0](i) * v.states[0](i);
        }
        xlive[b] += 1.0;
      }
    });
    std::size_t exploded = 0, failed = 0;
    double first_exit = std::numeric_limits<double>::infinity();
    for (const auto& s : status) {
      exploded += s.exploded;
      failed += s.solver_failed;
      if (s.terminated() && s.exit_index != kNoExit) first_exit = std::min(first_exit, grid.time(s.exit_index));
    }
    const double frac = static_cast<double>(exploded + failed) / static_cast<double>(c.n_paths);

    PlotSeries ps{name, {}, {}, {}, {}};
    json moments = json::array();
    for (std::size_t j = 0; j < ns; ++j) {
      double a = 0, b2 = 0, n = 0;
      for (std::size_t b = 0; b < nb; ++b) a += s1[b * ns + j], b2 += s2[b * ns + j], n += live[b * ns + j];
      const double m = n > 0 ? a / n : std::numeric_limits<double>::quiet_NaN();
      const double se = n > 1 ? std::sqrt(std::max(0.0, (b2 - n * m * m) / (n - 1)) / n) : 0.0;
      ps.x.push_back(grid.time(idx[j]));
      ps.y.push_back(m);
      ps.lo.push_back(m - 1.96 * se);
      ps.hi.push_back(m + 1.96 * se);
      moments.push_back({{"t", grid.time(idx[j])}, {"mean_sq_norm", num(m)}, {"std_error", num(se)}});
    }
    plot.series.push_back(ps);

    json final_mean = json::array(), final_se = json::array(), final_var = json::array();
    double n = 0;
    for (std::size_t b = 0; b < nb; ++b) n += xlive[b];
    for (int i = 0; i < d; ++i) {
      double a = 0, b2 = 0;
      for (std::size_t b = 0; b < nb; ++b)
        a += xs[b * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)],
            b2 += xs2[b * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
      const double m = n > 0 ? a / n : std::numeric_limits<double>::quiet_NaN();
      const double var = n > 1 ? std::max(0.0, (b2 - n * m * m) / (n - 1)) : 0.0;
      final_mean.push_back(num(m));
      final_var.push_back(num(var));
      final_se.push_back(num(n > 0 ? std::sqrt(var / n) : 0.0));
      table += name + "," + std::to_string(i + 1) + "," + csv_num(m) + "," + csv_num(n > 0 ? std::sqrt(var / n) : 0.0) +
               "," + csv_num(var) + "," + csv_num(frac) + "\n";
    }

    Verdict v = Verdict::Pass;
    std::string expectation = "none";
    if (const auto it = expect.find(name); it != expect.end()) {
      expectation = it->second;
      v = (it->second == "explodes") == (exploded + failed > 0) ? Verdict::Pass : Verdict::Fail;
    }
    ctx.add({{"check", "simulate"},
             {"scheme", name},
             {"x0", to_json(x0)},
             {"exploded_fraction", num(static_cast<double>(exploded) / static_cast<double>(c.n_paths))},
             {"solver_failure_fraction", num(static_cast<double>(failed) / static_cast<double>(c.n_paths))},
             {"first_exit_time", num(first_exit)},
             {"expectation", expectation},
             {"final_mean", final_mean},
             {"final_std_error", final_se},
             {"final_variance", final_var},
             {"second_moment", moments}},
            v, name + " from " + point_str(x0) + ": terminated fraction " + fmt("%.4g", frac));
  }
  ctx.files["final_moments.csv"] = table;
  ctx.plot("moments.svg", plot);

  if (write_paths) {
    SimulationConfig c = ctx.sim;
    c.scheme = scheme_from_string(schemes.front());
    const PathEnsemble e = simulate(ctx.problem, c, x0);
    std::ostringstream csv, bin;
    write_csv(e, csv);
    write_binary(e, bin);
    ctx.files["paths.csv"] = csv.str();
    ctx.files["paths.flw"] = bin.str();
  }
}

// ------------------------------------------------------------ lyapunov

double parse_lambda(Obj& o, const std::function<double()>& threshold) {
  const json* v = o.get("lambda");
  if (!v || (v->is_string() && *v == "threshold")) return threshold();
  return Obj::as_num(*v, o.at("lambda"));
}

void add_moment_reports(Context& ctx, const std::string& check, const Vec& x, json extra,
                        const std::vector<MomentReport>& reports) {
  json rs = json::array();
  Verdict v = Verdict::Pass;
  PlotSeries est{check + " estimate " + point_str(x), {}, {}, {}, {}}, bound{check + " bound " + point_str(x), {}, {}, {}, {}};
  std::string worst;
  for (const auto& r : reports) {
    rs.push_back(moment_json(r));
    v = combine(v, r.verdict);
    est.x.push_back(r.time);
    est.y.push_back(r.estimate);
    est.lo.push_back(r.estimate - 3 * r.std_error);
    est.hi.push_back(r.estimate + 3 * r.std_error);
    bound.x.push_back(r.time);
    bound.y.push_back(r.bound);
    worst += " t=" + fmt("%g", r.time) + ": " + fmt("%.5g", r.estimate) + " <= " + fmt("%.5g", r.bound);
  }
  extra["check"] = check;
  extra["x"] = to_json(x);
  extra["reports"] = rs;
  ctx.add(std::move(extra), v, check + " at " + point_str(x) + worst);
  if (reports.size() > 1) ctx.plot(check + "_" + std::to_string(ctx.series.size()) + ".svg", {check, "t", "moment", {est, bound}});
}

void run_lyapunov(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const auto xs = p.vecs("x", d, {Vec::Zero(d)});
  auto times = p.nums("times", {ctx.sim.horizon});
  const bool bias = p.flag("estimate_bias", true);
  const bool any = p.has("exp") || p.has("poly") || p.has("steering") || p.has("supermartingale");
  SimulationConfig c = ctx.sim;
  c.horizon = *std::max_element(times.begin(), times.end());

  if (p.has("exp") || !any) {
    const json empty = json::object();
    Obj e = p.has("exp") ? p.sub("exp") : Obj(empty, "params.exp");
    LyapunovSpec spec;
    spec.alpha = e.num("alpha", 1.0);
    const double threshold = exp_lambda_threshold(ctx.problem, spec.alpha);
    spec.lambda = parse_lambda(e, [&] { return threshold; });
    e.finish();
    for (const Vec& x : xs)
      add_moment_reports(ctx, "exp-moment", x, {{"alpha", spec.alpha}, {"lambda", spec.lambda}, {"threshold", num(threshold)}},
                         exp_moment_check(ctx.problem, c, x, spec, times, bias));
  }
  if (p.has("poly") || !any) {
    const json empty = json::object();
    Obj e = p.has("poly") ? p.sub("poly") : Obj(empty, "params.poly");
    const double pp = e.num("p", 1.0);
    const double threshold = poly_lambda_threshold(ctx.problem, pp);
    const double lambda = parse_lambda(e, [&] { return threshold; });
    e.finish();
    for (const Vec& x : xs)
      add_moment_reports(ctx, "poly-moment", x, {{"p", pp}, {"lambda", lambda}, {"threshold", num(threshold)}},
                         poly_moment_check(ctx.problem, c, x, pp, lambda, times, bias));
  }
  if (p.has("supermartingale")) {
    Obj s = p.sub("supermartingale");
    LyapunovSpec spec;
    spec.alpha = s.num("alpha", 1.0);
    const double threshold = exp_lambda_threshold(ctx.problem, spec.alpha);
    spec.lambda = parse_lambda(s, [&] { return threshold; });
    const double radius = s.num("radius");
    const auto st = s.nums("times", times);
    s.finish();
    SimulationConfig cs = ctx.sim;
    cs.horizon = *std::max_element(st.begin(), st.end());
    for (const Vec& x : xs) {
      const auto r = supermartingale_test(ctx.problem, cs, x, spec, radius, st);
      ctx.add({{"check", "supermartingale"},
               {"x", to_json(x)},
               {"radius", radius},
               {"lambda", spec.lambda},
               {"times", nums(r.times)},
               {"estimates", nums(r.estimates)},
               {"std_errors", nums(r.std_errors)},
               {"increments", nums(r.increments)},
               {"increment_errors", nums(r.increment_errors)},
               {"exploded_fraction", num(r.exploded_fraction)}},
              r.verdict, "stopped Lyapunov process at " + point_str(x) + " radius " + fmt("%g", radius));
    }
  }
  if (p.has("steering")) {
    Obj s = p.sub("steering");
    const Vec x0 = s.vec("x0", d, Vec::Zero(d));
    const Vec y0 = s.vec("y0", d, Vec::Zero(d));
    const auto ms = s.nums("m", {1.0, 10.0, 100.0});
    s.finish();
    const auto r = steering_contraction_check(ctx.problem, ctx.sim, x0, y0, ms);
    json levels = json::array();
    Plot plot{"steering contraction", "t", "E|Y_t - y0|^2", {}};
    for (const auto& l : r.levels) {
      levels.push_back({{"m", l.m},
                        {"times", nums(l.times)},
                        {"mean_sq", nums(l.mean_sq)},
                        {"std_errors", nums(l.std_errors)},
                        {"bound", nums(l.bound)},
                        {"sup_moment", num(l.sup_moment)},
                        {"sup_moment_half", num(l.sup_moment_half)},
                        {"sup_moment_se", num(l.sup_moment_se)},
                        {"sup_stable", l.sup_stable},
                        {"bound_holds", l.bound_holds},
                        {"exploded_fraction", num(l.exploded_fraction)}});
      PlotSeries ps{"m=" + fmt("%g", l.m), l.times, l.mean_sq, {}, {}};
      for (std::size_t k = 0; k < l.mean_sq.size(); ++k) {
        ps.lo.push_back(l.mean_sq[k] - 3 * l.std_errors[k]);
        ps.hi.push_back(l.mean_sq[k] + 3 * l.std_errors[k]);
      }
      plot.series.push_back(ps);
    }
    ctx.plot("steering.svg", plot);
    ctx.add({{"check", "steering"}, {"x0", to_json(x0)}, {"y0", to_json(y0)}, {"C0", num(r.C0)}, {"C1", num(r.C1)}, {"levels", levels}},
            r.verdict, "steering contraction C0=" + fmt("%.4g", r.C0) + " C1=" + fmt("%.4g", r.C1));
  }
  p.finish();
}

// ----------------------------------------------------------------- flow

double parse_r(Obj& o) {
  const json* v = o.get("r");
  if (!v || (v->is_string() && (*v == "inf" || *v == "infinity"))) return kInfNorm;
  return Obj::as_num(*v, o.at("r"));
}

void run_flow(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const std::string mode = p.str("mode", "witness");
  if (mode == "witness") {
    const auto grid = p.vecs("grid", d);
    const double pp = p.num("p", 2.0);
    const double r = parse_r(p);
    p.finish();
    const auto w = witness_fit(ctx.problem, ctx.sim, grid, pp, r);
    json pairs = json::array();
    for (const auto& q : w.pairs)
      pairs.push_back({{"i", q.i}, {"j", q.j}, {"distance", num(q.distance)}, {"quotient", num(q.quotient)}, {"std_error", num(q.std_error)}});
    json pts = json::array();
    for (const auto& x : w.base_grid) pts.push_back(to_json(x));
    ctx.add({{"check", "witness"},
             {"grid", pts},
             {"p", pp},
             {"r", num(r)},
             {"g", nums(w.g)},
             {"g_std_error", nums(w.g_std_error)},
             {"pairs", pairs},
             {"rounds", w.rounds},
             {"converged", w.converged},
             {"max_violation", num(w.max_violation)},
             {"worst_pair", w.worst_pair},
             {"excluded_fraction", num(w.excluded_fraction)},
             {"alpha", w.alpha},
             {"envelope_slope", num(w.envelope_slope)},
             {"envelope_gamma", num(w.envelope_gamma)},
             {"envelope_pass", w.envelope_pass}},
            w.verdict,
            "witness on " + std::to_string(grid.size()) + " points, max g " +
                fmt("%.6g", w.g.empty() ? 0.0 : *std::max_element(w.g.begin(), w.g.end())) +
                (w.envelope_pass ? ", envelope ok" : ", envelope violated"));
    if (d == 1) {
      PlotSeries ps{"g", {}, w.g, {}, {}};
      for (const auto& x : w.base_grid) ps.x.push_back(x(0));
      for (std::size_t i = 0; i < w.g.size(); ++i) {
        ps.lo.push_back(w.g[i] - 3 * w.g_std_error[i]);
        ps.hi.push_back(w.g[i] + 3 * w.g_std_error[i]);
      }
      ctx.plot("witness.svg", {"difference-quotient witness", "x", "g(x)", {ps}});
    }
  } else if (mode == "gradient") {
    const auto xs = p.vecs("x", d, {Vec::Zero(d)});
    const double h = p.num("h", 1e-3);
    const double pp = p.num("p", 2.0);
    const auto variant = gradient_variant_from_string(p.str("variant", "sup-of-expectation"));
    const double C = p.num("envelope_C", 1.0);
    const double gamma = p.num("envelope_gamma", 1.0);
    p.finish();
    for (const Vec& x : xs) {
      const auto g = fd_gradient(ctx.problem, ctx.sim, x, h, pp, variant, C, gamma);
      const auto& e = g.estimate;
      json jac = json::array();
      for (const auto& m : e.mean_jacobian) jac.push_back(nums(m));
      ctx.add({{"check", "flow-gradient"},
               {"x", to_json(x)},
               {"h", h},
               {"p", pp},
               {"variant", to_string(variant)},
               {"times", nums(e.times)},
               {"mean_jacobian", jac},
               {"moment", nums(e.moment)},
               {"moment_std_error", nums(e.moment_std_error)},
               {"sup_of_expectation", num(e.sup_of_expectation)},
               {"expectation_of_sup", num(e.expectation_of_sup)},
               {"expectation_of_sup_se", num(e.expectation_of_sup_se)},
               {"half_step_value", num(e.half_step_value)},
               {"step_size_warning", e.step_size_warning},
               {"exploded_fraction", num(e.exploded_fraction)},
               {"report", moment_json(g.report)}},
              g.report.verdict,
              "flow gradient at " + point_str(x) + ": " + fmt("%.5g", g.report.estimate) + " <= " + fmt("%.5g", g.report.bound));
      PlotSeries ps{"E|grad X_t|^p at " + point_str(x), e.times, e.moment, {}, {}};
      for (std::size_t k = 0; k < e.moment.size(); ++k) {
        ps.lo.push_back(e.moment[k] - 3 * e.moment_std_error[k]);
        ps.hi.push_back(e.moment[k] + 3 * e.moment_std_error[k]);
      }
      ctx.plot("gradient_" + std::to_string(ctx.series.size()) + ".svg", {"flow derivative moment", "t", "moment", {ps}});
    }
  } else if (mode == "maximal") {
    const std::string fn = p.str("function", "abs");
    const auto nodes = p.count("nodes", 201);
    const double spacing = p.num("spacing", 0.05);
    const double R = p.num("R", 1.0);
    const double clip = p.num("clip", 1.0);
    p.finish();
    Lattice lat;
    lat.shape = {nodes};
    lat.spacing = spacing;
    lat.origin = scalar_vec(-spacing * static_cast<double>(nodes - 1) / 2.0);
    std::function<double(const Vec&)> f, g;
    if (fn == "abs") {
      f = [](const Vec& x) { return std::abs(x(0)); };
      g = [](const Vec&) { return 1.0; };
    } else if (fn == "square-clipped") {
      f = [clip](const Vec& x) { return std::min(x(0) * x(0), clip); };
      g = [clip](const Vec& x) { return x(0) * x(0) < clip ? 2.0 * std::abs(x(0)) : 0.0; };
    } else {
      config_error("params.function", "expected \"abs\" or \"square-clipped\"");
    }
    const auto r = maximal_inequality_check(f, g, lat, R);
    ctx.add({{"check", "maximal-inequality"},
             {"function", fn},
             {"nodes", nodes},
             {"spacing", spacing},
             {"R", R},
             {"pairs_checked", r.pairs_checked},
             {"violations", r.violations},
             {"worst_ratio", num(r.worst_ratio)}},
            r.violations == 0 ? Verdict::Pass : Verdict::Fail,
            "maximal inequality for " + fn + ": " + std::to_string(r.violations) + " violations in " +
                std::to_string(r.pairs_checked) + " pairs");
  } else {
    config_error("params.mode", "expected witness, gradient or maximal");
  }
}

// ----------------------------------------------------------- occupation

void run_occupation(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const std::string mode = p.str("mode", "khasminskii");
  if (mode == "integral") {
    const std::string src = p.str("f");
    const SpaceTimeFn f = space_time(src, d, "params.f");
    const auto xs = p.vecs("x", d, {Vec::Zero(d)});
    p.finish();
    for (const Vec& x : xs) {
      const auto e = occupation_integral(ctx.problem, ctx.sim, x, f);
      ctx.add({{"check", "occupation-integral"},
               {"f", src},
               {"x", to_json(x)},
               {"value", num(e.value)},
               {"std_error", num(e.std_error)},
               {"clip_fraction", num(e.clip_fraction)},
               {"n_paths", e.n_paths}},
              Verdict::Pass, "E int f(t,X_t) dt at " + point_str(x) + " = " + fmt("%.6g", e.value) + " +- " + fmt("%.2g", e.std_error));
    }
  } else if (mode == "khasminskii") {
    const std::string src = p.str("f");
    const SpaceTimeFn f = space_time(src, d, "params.f");
    const double R = p.num("R", 1.0);
    const auto grid = p.vecs("grid", d, {Vec::Zero(d)});
    p.finish();
    const auto r = khasminskii_check(ctx.problem, ctx.sim, f, R, grid);
    json pts = json::array();
    for (const auto& q : r.points)
      pts.push_back({{"x", to_json(q.x)},
                     {"occupation", num(q.occupation)},
                     {"occupation_se", num(q.occupation_se)},
                     {"lhs", num(q.lhs)},
                     {"lhs_se", num(q.lhs_se)},
                     {"rhs", num(q.rhs)},
                     {"diff", num(q.diff)},
                     {"diff_se", num(q.diff_se)},
                     {"tail_fraction", num(q.tail_fraction)},
                     {"pass", q.pass}});
    ctx.add({{"check", "khasminskii"},
             {"f", src},
             {"R", R},
             {"c", num(r.c)},
             {"c_std_error", num(r.c_std_error)},
             {"applicable", r.applicable},
             {"lhs", num(r.lhs)},
             {"rhs", num(r.rhs)},
             {"points", pts},
             {"note", r.note}},
            r.verdict,
            "Khasminskii c=" + fmt("%.5g", r.c) + (r.applicable ? " applicable, lhs " + fmt("%.5g", r.lhs) + " <= rhs " + fmt("%.5g", r.rhs) : " not applicable"));
  } else if (mode == "krylov") {
    const double q = p.num("q", 2.0);
    const Vec x = p.vec("x", d, Vec::Zero(d));
    KrylovBox box;
    if (p.has("box")) {
      Obj b = p.sub("box");
      box.t0 = b.num("t0", box.t0);
      box.t1 = b.num("t1", ctx.sim.horizon);
      box.lo = b.num("lo", box.lo);
      box.hi = b.num("hi", box.hi);
      box.nodes_per_axis = b.count("nodes_per_axis", box.nodes_per_axis);
      b.finish();
    } else {
      box.t1 = ctx.sim.horizon;
    }
    const json& fam = p.req("family");
    if (!fam.is_array() || fam.empty()) config_error("params.family", "expected a nonempty list");
    std::vector<KrylovMember> members;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      Obj m(fam[i], "params.family[" + std::to_string(i) + "]");
      KrylovMember km;
      const std::string src = m.str("f");
      km.name = m.str("name", src);
      km.f = space_time(src, d, m.at("f"));
      if (m.has("norm")) km.norm = m.num("norm");
      m.finish();
      members.push_back(std::move(km));
    }
    p.finish();
    const auto r = krylov_ratio(ctx.problem, ctx.sim, x, members, q, box);
    json rows = json::array();
    PlotSeries ps{"ratio", {}, {}, {}, {}};
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const auto& row = r.rows[i];
      rows.push_back({{"name", row.name},
                      {"occupation", num(row.occupation)},
                      {"std_error", num(row.std_error)},
                      {"f_norm", num(row.f_norm)},
                      {"ratio", num(row.ratio)},
                      {"norm_from_box", row.norm_from_box}});
      ps.x.push_back(static_cast<double>(i));
      ps.y.push_back(row.ratio);
    }
    ctx.plot("krylov.svg", {"Krylov ratio along the family", "member", "occupation / norm", {ps}});
    ctx.add({{"check", "krylov"}, {"q", q}, {"x", to_json(x)}, {"rows", rows}, {"max_ratio", num(r.max_ratio)}, {"bounded", r.bounded}, {"warnings", r.warnings}},
            r.verdict, "Krylov ratio max " + fmt("%.5g", r.max_ratio) + (r.bounded ? " bounded" : " growing"));
  } else if (mode == "exp") {
    const std::string src = p.str("f");
    const SpaceTimeFn f = space_time(src, d, "params.f");
    const auto grid = p.vecs("grid", d);
    const double R0 = p.num("R0", ctx.problem.growth ? ctx.problem.growth->R0 : 1.0);
    p.finish();
    const auto r = exp_occupation_check(ctx.problem, ctx.sim, grid, f, R0);
    json pts = json::array();
    for (const auto& q : r.points)
      pts.push_back({{"x", to_json(q.x)}, {"cauchy_schwarz", q.cauchy_schwarz}, {"report", moment_json(q.report)}});
    ctx.add({{"check", "exp-occupation"},
             {"f", src},
             {"R0", R0},
             {"alpha", r.alpha},
             {"slope", num(r.slope)},
             {"envelope_gamma", num(r.envelope_gamma)},
             {"envelope_pass", r.envelope_pass},
             {"points", pts}},
            r.verdict, "exponential occupation bound on " + std::to_string(grid.size()) + " points");
  } else if (mode == "local") {
    const std::string src = p.str("f");
    const SpaceTimeFn f = space_time(src, d, "params.f");
    const Vec x = p.vec("x", d, Vec::Zero(d));
    const double R = p.num("R", 1.0);
    const auto ref = p.count("reference_paths", 0);
    p.finish();
    const auto r = local_exp_occupation_check(ctx.problem, ctx.sim, x, f, R, ref);
    ctx.add({{"check", "local-exp-occupation"},
             {"f", src},
             {"x", to_json(x)},
             {"R", R},
             {"estimate", num(r.estimate)},
             {"std_error", num(r.std_error)},
             {"reference", num(r.reference)},
             {"reference_se", num(r.reference_se)},
             {"n_paths", r.n_paths},
             {"reference_paths", r.reference_paths},
             {"clip_fraction", num(r.clip_fraction)},
             {"tail_fraction", num(r.tail_fraction)},
             {"stable", r.stable}},
            r.verdict, "stopped exponential occupation at " + point_str(x) + " = " + fmt("%.5g", r.estimate));
  } else {
    config_error("params.mode", "expected integral, khasminskii, krylov, exp or local");
  }
}

// -------------------------------------------------------------- zvonkin

void run_zvonkin(Context& ctx, Obj p) {
  const double R0 = p.num("R0", 4.0);
  const double x = p.num("x", 0.5);
  const auto dts = p.nums("dts", {1e-2, 1e-3, 1e-4});
  const auto window = p.nums("ratio_window", {1.2, 3.0});
  if (window.size() != 2) config_error("params.ratio_window", "expected [lo, hi]");
  PdeOptions opt;
  opt.horizon = ctx.sim.horizon;
  if (p.has("pde")) {
    Obj o = p.sub("pde");
    opt.half_width = o.num("half_width", opt.half_width);
    opt.nx = o.count("nx", opt.nx);
    opt.nt = o.count("nt", opt.nt);
    opt.lambda0 = o.num("lambda0", opt.lambda0);
    opt.max_doublings = static_cast<int>(o.count("max_doublings", static_cast<std::size_t>(opt.max_doublings)));
    o.finish();
  }
  const bool dump = p.flag("write_solution", false);
  p.finish();

  const DriftSplit split = split_drift(ctx.problem, R0);
  const auto sig = ctx.problem.field.diffusion;
  const auto a = [sig](double t, double y) {
    const double s = sig(t, scalar_vec(y))(0, 0);
    return s * s;
  };
  const PdeSolution sol = solve_backward_pde(split.b1, a, R0, opt);
  json trace = json::array();
  std::string trace_csv = "lambda,sup_u,sup_du,sum\n";
  for (const auto& t : sol.trace) {
    trace.push_back({{"lambda", t.lambda}, {"sup_u", num(t.sup_u)}, {"sup_du", num(t.sup_du)}});
    trace_csv += csv_num(t.lambda) + "," + csv_num(t.sup_u) + "," + csv_num(t.sup_du) + "," + csv_num(t.sup_u + t.sup_du) + "\n";
  }
  ctx.files["lambda_trace.csv"] = trace_csv;
  ctx.add({{"check", "drift-split"},
           {"R0", R0},
           {"grad_chi_sup", num(split.grad_chi_sup)},
           {"grad_chi_ok", split.grad_chi_ok},
           {"reconstruction_error", num(split.reconstruction_error)}},
          split.grad_chi_ok && split.reconstruction_error <= 1e-12 ? Verdict::Pass : Verdict::Fail,
          "drift split R0=" + fmt("%g", R0) + " sup|grad chi|=" + fmt("%.4g", split.grad_chi_sup));
  json pde = {{"check", "backward-pde"},
              {"lambda", sol.lambda},
              {"sup_u", num(sol.sup_u)},
              {"sup_du", num(sol.sup_du)},
              {"accepted", sol.accepted},
              {"boundary_margin", num(sol.boundary_margin)},
              {"nx", sol.u.nx()},
              {"nt", sol.u.times().size() - 1},
              {"trace", trace}};
  ctx.add(pde, sol.accepted ? Verdict::Pass : Verdict::Fail,
          "backward PDE lambda=" + fmt("%g", sol.lambda) + " sup|u|+sup|u'|=" + fmt("%.4g", sol.sup_u + sol.sup_du));
  if (!sol.accepted) return;
  if (dump) {
    std::ostringstream out;
    write_solution(sol, out);
    ctx.files["solution.zvk"] = out.str();
  }

  const ZvonkinTransform zt(ctx.problem, split, sol);
  const auto& s = zt.sandwich();
  ctx.add({{"check", "sandwich"},
           {"min_slope", num(s.min_slope)},
           {"max_slope", num(s.max_slope)},
           {"worst_x", num(s.worst_x)},
           {"worst_y", num(s.worst_y)},
           {"worst_t", num(s.worst_t)},
           {"R1", zt.R1()},
           {"inverse_error", num(zt.inverse_error())}},
          s.pass ? Verdict::Pass : Verdict::Fail,
          "bi-Lipschitz slopes in [" + fmt("%.4f", s.min_slope) + ", " + fmt("%.4f", s.max_slope) + "]");

  const auto ref = conjugacy_refinement(ctx.problem, zt, ctx.sim, x, dts, window[0], window[1]);
  json levels = json::array();
  std::string csv = "dt,median,q95,max,excluded_fraction\n";
  PlotSeries ps{"median error", {}, {}, {}, {}};
  for (const auto& l : ref.levels) {
    levels.push_back({{"dt", l.dt},
                      {"n_paths", l.n_paths},
                      {"median", num(l.median)},
                      {"q95", num(l.q95)},
                      {"max", num(l.max)},
                      {"excluded_fraction", num(l.excluded_fraction)}});
    csv += csv_num(l.dt) + "," + csv_num(l.median) + "," + csv_num(l.q95) + "," + csv_num(l.max) + "," + csv_num(l.excluded_fraction) + "\n";
    ps.x.push_back(std::log10(l.dt));
    ps.y.push_back(std::log10(l.median));
  }
  ctx.files["conjugacy.csv"] = csv;
  ctx.plot("conjugacy.svg", {"conjugacy error under refinement", "log10 dt", "log10 median error", {ps}});
  std::string ratios;
  for (double r : ref.ratios) ratios += " " + fmt("%.3f", r);
  ctx.add({{"check", "conjugacy"},
           {"x", x},
           {"levels", levels},
           {"ratios", nums(ref.ratios)},
           {"ratio_window", nums({ref.ratio_lo, ref.ratio_hi})},
           {"monotone", ref.monotone},
           {"ratios_in_window", ref.ratios_in_window}},
          ref.monotone && ref.ratios_in_window ? Verdict::Pass : Verdict::Fail, "conjugacy level ratios" + ratios);
}

// --------------------------------------------------------------- markov

json hitting_json(const HittingEstimate& h) {
  return {{"method", to_string(h.method)},
          {"x0", to_json(h.x0)},
          {"y0", to_json(h.y0)},
          {"a", h.a},
          {"T", h.T},
          {"m", h.m},
          {"N", h.N},
          {"p_hat", num(h.p_hat)},
          {"std_error", num(h.std_error)},
          {"ci_low", num(h.ci_low)},
          {"ci_high", num(h.ci_high)},
          {"successes", h.successes},
          {"n_paths", h.n_paths},
          {"ess", num(h.ess)},
          {"truncated_fraction", num(h.truncated_fraction)},
          {"exploded_fraction", num(h.exploded_fraction)},
          {"warnings", h.warnings}};
}

json profile_json(const SemigroupProfile& p) {
  json pts = json::array();
  for (const auto& x : p.x_grid) pts.push_back(to_json(x));
  return {{"t", p.t},
          {"f_sup", p.f_sup},
          {"grid", pts},
          {"values", nums(p.values)},
          {"std_errors", nums(p.std_errors)},
          {"modulus", num(p.modulus)},
          {"modulus_se", num(p.modulus_se)},
          {"bounded", p.bounded}};
}

PlotSeries profile_series(const std::string& name, const SemigroupProfile& p) {
  PlotSeries s{name, {}, p.values, {}, {}};
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    s.x.push_back(p.x_grid[i](0));
    s.lo.push_back(p.values[i] - 1.96 * p.std_errors[i]);
    s.hi.push_back(p.values[i] + 1.96 * p.std_errors[i]);
  }
  return s;
}

void run_markov(Context& ctx, Obj p) {
  const int d = ctx.problem.field.dim;
  const std::string mode = p.str("mode", "hitting");
  if (mode == "semigroup") {
    const std::string src = p.str("f");
    const Expression e = Expression::parse(src);
    if (e.max_variable() > d) config_error("params.f", "references a coordinate beyond dimension " + std::to_string(d));
    const StateFn f = [e](const Vec& x) { return e.eval(0.0, x); };
    const double f_sup = p.num("f_sup", 1.0);
    const double t = p.num("t", ctx.sim.horizon);
    const auto coarse = p.vecs("grid", d);
    std::vector<Vec> fine;
    if (p.has("fine_grid")) {
      fine = p.vecs("fine_grid", d);
    } else {
      for (std::size_t i = 0; i < coarse.size(); ++i) {
        fine.push_back(coarse[i]);
        if (i + 1 < coarse.size()) fine.push_back(0.5 * (coarse[i] + coarse[i + 1]));
      }
    }
    p.finish();
    const auto r = semigroup_refinement(ctx.problem, ctx.sim, f, f_sup, t, coarse, fine);
    ctx.add({{"check", "semigroup"},
             {"f", src},
             {"coarse", profile_json(r.coarse)},
             {"fine", profile_json(r.fine)},
             {"pooled_se", num(r.pooled_se)},
             {"stable", r.stable},
             {"kind", "evidence"}},
            r.verdict,
            "semigroup modulus " + fmt("%.4g", r.coarse.modulus) + " -> " + fmt("%.4g", r.fine.modulus) + " under refinement");
    if (d == 1)
      ctx.plot("semigroup.svg", {"x -> E f(X_t(x))", "x", "P_t f(x)", {profile_series("coarse", r.coarse), profile_series("fine", r.fine)}});
  } else if (mode == "hitting") {
    const Vec x0 = p.vec("x0", d);
    const Vec y0 = p.vec("y0", d);
    const double a = p.num("a");
    const double T = p.num("T", ctx.sim.horizon);
    const std::string method = p.str("method", "both");
    const double m = p.num("m", -1.0);
    const double N = p.num("N", -1.0);
    p.finish();
    if (method != "naive" && method != "girsanov" && method != "both")
      config_error("params.method", "expected naive, girsanov or both");
    Verdict overall = Verdict::Unresolved;
    json ests = json::array();
    std::string line;
    auto fold = [&](const HittingEstimate& h) {
      ests.push_back(hitting_json(h));
      line += std::string(" ") + to_string(h.method) + " p=" + fmt("%.4g", h.p_hat) + " ci_low=" + fmt("%.4g", h.ci_low);
      if (h.verdict == Verdict::Pass) overall = Verdict::Pass;
      else if (overall != Verdict::Pass && h.verdict == Verdict::Fail) overall = Verdict::Fail;
    };
    if (method != "girsanov") fold(hitting_probability(ctx.problem, ctx.sim, x0, y0, a, T));
    if (method != "naive") fold(girsanov_hitting(ctx.problem, ctx.sim, x0, y0, a, T, m, N));
    ctx.add({{"check", "hitting"}, {"estimates", ests}, {"kind", "lower-bound"}}, overall,
            "P(|X_T - y0| <= a) from " + point_str(x0) + " to " + point_str(y0) + ":" + line);
  } else {
    config_error("params.mode", "expected semigroup or hitting");
  }
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') ++line, col = 1;
    else ++col;
  }
  return {line, col};
}

}  // namespace

Verdict combine(Verdict a, Verdict b) {
  if (a == Verdict::Fail || b == Verdict::Fail) return Verdict::Fail;
  if (a == Verdict::Pass && b == Verdict::Pass) return Verdict::Pass;
  return Verdict::Inconclusive;
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    default: return 2;
  }
}

ExperimentOutput run_experiment(std::string_view config_text, const RunOverrides& overrides) {
  json root;
  try {
    root = json::parse(config_text.begin(), config_text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(config_text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::InvalidConfig,
                "config is not valid JSON (line " + std::to_string(line) + ", column " + std::to_string(col) + ")");
  }
  Obj top(root, "");
  const auto version = top.count("version", 1);
  if (version != 1) config_error("version", "only version 1 is supported");
  const std::string kind = top.str("kind");
  static const std::set<std::string> kinds = {"audit", "simulate", "lyapunov", "flow", "occupation", "zvonkin", "markov"};
  if (!kinds.count(kind)) config_error("kind", "expected audit, simulate, lyapunov, flow, occupation, zvonkin or markov");

  Context ctx;
  ctx.problem = parse_problem(top.sub("problem"));
  ctx.sim = parse_simulation(top.get("simulation"), overrides);
  const json empty = json::object();
  const json* params = top.get("params");
  Obj p(params ? *params : empty, "params");

  ExperimentOutput out;
  out.kind = kind;
  if (top.has("output")) {
    Obj o = top.sub("output");
    out.out_dir = o.str("dir", "");
    out.plots = o.flag("plots", true);
    o.finish();
  }
  const std::string name = top.str("name", kind);
  top.finish();

  if (kind == "audit") run_audit(ctx, std::move(p));
  else if (kind == "simulate") run_simulate(ctx, std::move(p));
  else if (kind == "lyapunov") run_lyapunov(ctx, std::move(p));
  else if (kind == "flow") run_flow(ctx, std::move(p));
  else if (kind == "occupation") run_occupation(ctx, std::move(p));
  else if (kind == "zvonkin") run_zvonkin(ctx, std::move(p));
  else run_markov(ctx, std::move(p));

  json report = {{"schema", "flowlab-report/1"},
                 {"name", name},
                 {"kind", kind},
                 {"problem", {{"id", ctx.problem.preset_id}, {"dim", ctx.problem.field.dim}, {"noise_dim", ctx.problem.field.noise_dim}}},
                 {"simulation", sim_json(ctx.sim)},
                 {"params", params ? *params : empty},
                 {"results", ctx.results},
                 {"plots", ctx.series},
                 {"verdict", to_string(ctx.verdict)},
                 {"exit_code", exit_code(ctx.verdict)}};
  out.report_json = report.dump(2) + "\n";
  out.verdict = ctx.verdict;
  out.summary = std::move(ctx.summary);
  out.files = std::move(ctx.files);
  if (out.plots)
    for (auto& [file, svg] : plots_from_report(out.report_json)) out.files[file] = std::move(svg);
  return out;
}

std::map<std::string, std::string> plots_from_report(std::string_view report_json) {
  json r;
  try {
    r = json::parse(report_json.begin(), report_json.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("report is not valid JSON: ") + e.what());
  }
  std::map<std::string, std::string> out;
  if (!r.is_object() || !r.contains("plots")) return out;
  for (const auto& p : r["plots"]) {
    Plot plot;
    plot.title = p.value("title", "");
    plot.x_label = p.value("x_label", "");
    plot.y_label = p.value("y_label", "");
    for (const auto& s : p.value("series", json::array())) {
      PlotSeries ps;
      ps.name = s.value("name", "");
      auto vals = [&](const char* key) {
        std::vector<double> v;
        for (const auto& e : s.value(key, json::array())) v.push_back(from_num(e));
        return v;
      };
      ps.x = vals("x");
      ps.y = vals("y");
      ps.lo = vals("lo");
      ps.hi = vals("hi");
      plot.series.push_back(std::move(ps));
    }
    out[p.value("file", "plot.svg")] = render_svg(plot);
  }
  return out;
}

std::string preset_table() {
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"example1(beta)", "example1(0.4)"}, {"bm(d)", "bm(1)"}, {"ou(d)", "ou(1)"},
      {"step-drift-1d", "step-drift-1d"}, {"degenerate-example1(gamma)", "degenerate-example1(1)"}};
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-24s %6s %6s %7s %7s %7s %5s  %s\n", "preset", "instance", "alpha", "alpha'",
                "C1", "C2", "C3", "R0", "summary");
  out += buf;
  const auto catalog = preset_catalog();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SdeProblem p = preset(rows[i].second);
    std::string summary;
    for (const auto& c : catalog)
      if (c.id == rows[i].first) summary = c.summary;
    if (p.growth) {
      const auto& g = *p.growth;
      std::snprintf(buf, sizeof buf, "%-28s %-24s %6g %6g %7.4g %7.4g %7.4g %5g  %s\n", rows[i].first.c_str(),
                    p.preset_id.c_str(), g.alpha, g.alpha_prime, g.C1, g.C2, g.C3, g.R0, summary.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-28s %-24s %6s %6s %7s %7s %7s %5s  %s\n", rows[i].first.c_str(),
                    p.preset_id.c_str(), "-", "-", "-", "-", "-", "-", summary.c_str());
    }
    out += buf;
  }
  return out;
}

}  // namespace flowlab
