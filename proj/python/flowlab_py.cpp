#include "flowlab/coefficients.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/flow_regularity.hpp"
#include "flowlab/integrators.hpp"
#include "flowlab/markov_stats.hpp"
#include "flowlab/parallel.hpp"
#include "flowlab/rng.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace flowlab;

namespace {

Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) throw Error(ErrorCode::InvalidArgument, "point dimension must lie in [1, 4]");
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i)) = v[i];
  return x;
}

std::vector<double> from_vec(const Vec& x) { return {x.data(), x.data() + x.size()}; }

SimulationConfig make_config(double dt, double horizon, std::size_t paths, std::uint64_t seed, const std::string& scheme,
                             std::size_t record_stride, double cap) {
  SimulationConfig c;
  c.dt = dt;
  c.horizon = horizon;
  c.n_paths = paths;
  c.seed = seed;
  c.scheme = scheme_from_string(scheme);
  c.record_stride = record_stride;
  c.explosion_cap = cap;
  c.validate();
  return c;
}

py::dict hitting_dict(const HittingEstimate& h) {
  py::dict d;
  d["method"] = to_string(h.method);
  d["p_hat"] = h.p_hat;
  d["std_error"] = h.std_error;
  d["ci_low"] = h.ci_low;
  d["ci_high"] = h.ci_high;
  d["successes"] = h.successes;
  d["n_paths"] = h.n_paths;
  d["ess"] = h.ess;
  d["m"] = h.m;
  d["N"] = h.N;
  d["verdict"] = to_string(h.verdict);
  d["warnings"] = h.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_flowlab, m) {
  m.doc() = "Monte Carlo checks for stochastic flows of SDEs";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(to_string(e.code())) + ": " + e.what();
      if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::Parse ||
          e.code() == ErrorCode::PresetNotFound)
        PyErr_SetString(PyExc_ValueError, msg.c_str());
      else
        PyErr_SetString(PyExc_RuntimeError, msg.c_str());
    }
  });

  m.def("set_threads", [](unsigned n) { parallel::set_worker_count(n); }, py::arg("n"),
        "Caps the worker pool; 0 restores the default.");
  m.def("threads", &parallel::worker_count);

  m.def("philox4x32", [](std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    return Philox4x32::generate(ctr, key);
  });

  m.def("preset_table", &preset_table);
  m.def("preset_ids", [] {
    std::vector<std::string> ids;
    for (const auto& p : preset_catalog()) ids.push_back(p.id);
    return ids;
  });

  m.def("drift", [](const std::string& name, double t, const std::vector<double>& x) {
    return from_vec(preset(name).field.b(t, to_vec(x)));
  }, py::arg("preset"), py::arg("t"), py::arg("x"));

  m.def("audit", [](const std::string& name, double kappa, double half_width) {
    const SdeProblem p = preset(name);
    const auto grid = default_audit_grid(p.field.dim, half_width);
    const auto pairs = default_audit_pairs(p.field.dim, half_width);
    py::list out;
    for (const AuditReport& r : {audit_coercivity(p, kappa, grid), audit_monotonicity(p, kappa, pairs),
                                 audit_ellipticity(p, grid), audit_growth(p, grid)}) {
      py::dict d;
      d["quantity"] = r.quantity_name;
      d["worst_value"] = r.worst_value;
      d["margin"] = r.margin;
      d["pass"] = r.pass;
      out.append(d);
    }
    return out;
  }, py::arg("preset"), py::arg("kappa") = 1.0, py::arg("half_width") = 10.0);

  m.def("simulate", [](const std::string& name, const std::vector<double>& x0, double dt, double horizon,
                       std::size_t paths, std::uint64_t seed, const std::string& scheme, std::size_t record_stride,
                       double cap) {
    const SdeProblem p = preset(name);
    const SimulationConfig c = make_config(dt, horizon, paths, seed, scheme, record_stride, cap);
    PathEnsemble e;
    {
      py::gil_scoped_release release;
      e = simulate(p, c, to_vec(x0));
    }
    const auto nt = static_cast<py::ssize_t>(e.time_grid.size());
    py::array_t<double> states({static_cast<py::ssize_t>(e.n_paths), nt, static_cast<py::ssize_t>(e.dim)});
    std::copy(e.states.begin(), e.states.end(), states.mutable_data());
    py::array_t<bool> exploded(static_cast<py::ssize_t>(e.n_paths));
    for (std::size_t i = 0; i < e.n_paths; ++i) exploded.mutable_data()[i] = e.status[i].terminated();
    py::dict d;
    d["times"] = py::array_t<double>(nt, e.time_grid.data());
    d["states"] = states;
    d["exploded"] = exploded;
    return d;
  }, py::arg("preset"), py::arg("x0"), py::arg("dt") = 1e-3, py::arg("horizon") = 1.0, py::arg("paths") = 1000,
     py::arg("seed") = 0, py::arg("scheme") = "tamed-euler", py::arg("record_stride") = 1, py::arg("explosion_cap") = 1e6);

  m.def("hitting_probability", [](const std::string& name, const std::vector<double>& x0, const std::vector<double>& y0,
                                  double a, double T, double dt, std::size_t paths, std::uint64_t seed) {
    const SdeProblem p = preset(name);
    py::gil_scoped_release release;
    const auto h = hitting_probability(p, make_config(dt, T, paths, seed, "tamed-euler", 1, 1e6), to_vec(x0), to_vec(y0), a, T);
    py::gil_scoped_acquire acquire;
    return hitting_dict(h);
  }, py::arg("preset"), py::arg("x0"), py::arg("y0"), py::arg("a"), py::arg("T") = 1.0, py::arg("dt") = 1e-3,
     py::arg("paths") = 10000, py::arg("seed") = 0);

  m.def("girsanov_hitting", [](const std::string& name, const std::vector<double>& x0, const std::vector<double>& y0,
                               double a, double T, double mrate, double N, double dt, std::size_t paths, std::uint64_t seed) {
    const SdeProblem p = preset(name);
    py::gil_scoped_release release;
    const auto h = girsanov_hitting(p, make_config(dt, T, paths, seed, "tamed-euler", 1, 1e6), to_vec(x0), to_vec(y0), a, T,
                                    mrate, N);
    py::gil_scoped_acquire acquire;
    return hitting_dict(h);
  }, py::arg("preset"), py::arg("x0"), py::arg("y0"), py::arg("a"), py::arg("T") = 1.0, py::arg("m") = -1.0,
     py::arg("N") = -1.0, py::arg("dt") = 1e-3, py::arg("paths") = 10000, py::arg("seed") = 0);

  m.def("maximal_function", [](const std::vector<double>& values, double spacing, double R) {
    Lattice lat;
    lat.shape = {values.size()};
    lat.spacing = spacing;
    lat.origin = scalar_vec(0.0);
    return maximal_function(values, lat, R);
  }, py::arg("values"), py::arg("spacing"), py::arg("R"), "1-D local maximal function on a uniform lattice.");

  m.def("run_experiment", [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<double> dt,
                             std::optional<std::size_t> paths) {
    RunOverrides ov{seed, dt, paths};
    ExperimentOutput out;
    {
      py::gil_scoped_release release;
      out = run_experiment(config, ov);
    }
    py::dict d;
    d["kind"] = out.kind;
    d["verdict"] = to_string(out.verdict);
    d["exit_code"] = exit_code(out.verdict);
    d["report_json"] = out.report_json;
    d["summary"] = out.summary;
    py::dict files;
    for (const auto& [k, v] : out.files) files[py::str(k)] = py::bytes(v);
    d["files"] = files;
    return d;
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("dt") = py::none(), py::arg("paths") = py::none(),
     "Runs a JSON experiment config; returns the deterministic report and artifacts.");
}
