#include "flowlab/coefficients.hpp"
#include "flowlab/zvonkin.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace flowlab;

namespace {

PdeOptions small_options() {
  PdeOptions o;
  o.horizon = 1.0;
  o.nx = 1201;
  o.nt = 200;
  return o;
}

const std::function<double(double, double)> unit_a = [](double, double) { return 1.0; };

struct Built {
  SdeProblem problem;
  DriftSplit split;
  ZvonkinTransform transform;
};

Built build(const std::string& name, double R0) {
  SdeProblem p = preset(name);
  DriftSplit s = split_drift(p, R0);
  PdeSolution sol = solve_backward_pde(s.b1, unit_a, R0, small_options());
  ZvonkinTransform z(p, s, std::move(sol));
  return {std::move(p), std::move(s), std::move(z)};
}

}  // namespace

TEST_SUITE("zvonkin") {
  TEST_CASE("cutoff shape") {
    const Cutoff c{2.0};
    CHECK(c.value(0.0) == 1.0);
    CHECK(c.value(2.0) == 1.0);
    CHECK(c.value(-4.0) == 0.0);
    CHECK(c.value(7.0) == 0.0);
    double sup = 0;
    for (int i = -6000; i <= 6000; ++i) {
      const double x = i * 1e-3;
      CHECK(c.value(x) >= 0.0);
      CHECK(c.value(x) <= 1.0);
      sup = std::max(sup, std::abs(c.d1(x)));
      // Derivative consistency.
      const double fd = (c.value(x + 1e-6) - c.value(x - 1e-6)) / 2e-6;
      CHECK(c.d1(x) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
    CHECK(sup == doctest::Approx(c.gradient_bound()).epsilon(1e-3));
    CHECK(sup <= c.gradient_bound() + 1e-12);
  }

  TEST_CASE("drift split reconstructs the drift") {
    const auto s = split_drift(preset("step-drift-1d"), 4.0);
    CHECK(s.reconstruction_error <= 1e-12);
    CHECK(s.grad_chi_ok);
    CHECK(s.b1(0, 20.0) == 0.0);
    CHECK(s.b1(0, 1.0) == -1.0);
    CHECK_THROWS_AS(split_drift(preset("step-drift-1d"), 2.0), Error);
    CHECK_THROWS_AS(split_drift(preset("bm(2)"), 4.0), Error);
  }

  TEST_CASE("zero forcing gives the zero solution") {
    const auto sol = solve_backward_pde_fixed([](double, double) { return 0.0; }, unit_a, 1.0, 4.0, small_options());
    CHECK(std::all_of(sol.u.data().begin(), sol.u.data().end(), [](double v) { return v == 0.0; }));
    CHECK(sol.accepted);
  }

  TEST_CASE("terminal condition and maximum principle") {
    const auto s = split_drift(preset("step-drift-1d"), 4.0);
    for (double lambda : {1.0, 4.0, 16.0}) {
      const auto sol = solve_backward_pde_fixed(s.b1, unit_a, lambda, 4.0, small_options());
      const auto& u = sol.u;
      const auto& ts = u.times();
      const std::size_t last = static_cast<std::size_t>(std::max_element(ts.begin(), ts.end()) - ts.begin());
      CHECK(ts[last] == doctest::Approx(1.0));
      for (std::size_t i = 0; i < u.nx(); ++i) CHECK(u.at(last, i) == 0.0);
      // |u| <= sup|b1| / lambda.
      CHECK(sol.sup_u <= 1.0 / lambda + 1e-12);
    }
  }

  TEST_CASE("lambda doubling stops at the first admissible value") {
    const auto s = split_drift(preset("step-drift-1d"), 4.0);
    const auto sol = solve_backward_pde(s.b1, unit_a, 4.0, small_options());
    REQUIRE(sol.accepted);
    REQUIRE(!sol.trace.empty());
    CHECK(sol.sup_u + sol.sup_du <= 0.5);
    for (std::size_t k = 0; k + 1 < sol.trace.size(); ++k) {
      CHECK(sol.trace[k + 1].lambda == doctest::Approx(2 * sol.trace[k].lambda));
      CHECK(sol.trace[k + 1].sup_u <= sol.trace[k].sup_u + 1e-15);
      CHECK(sol.trace[k].sup_u + sol.trace[k].sup_du > 0.5);
    }
    CHECK(sol.trace.back().lambda == sol.lambda);
  }

  TEST_CASE("long horizon reaches a manufactured stationary solution") {
    // u*(x) = c exp(-x^2) solves (1/2) u'' + b1 u' + b1 = lambda u for
    // b1 = (lambda u* - u*''/2) / (1 + u*').
    const double c = 0.05, lambda = 4.0;
    auto us = [c](double x) { return c * std::exp(-x * x); };
    auto b1 = [c, lambda](double, double x) {
      const double e = std::exp(-x * x);
      const double u = c * e, du = -2 * x * c * e, d2u = (4 * x * x - 2) * c * e;
      return (lambda * u - 0.5 * d2u) / (1 + du);
    };
    PdeOptions o = small_options();
    o.horizon = 4.0;
    o.nt = 400;
    const auto sol = solve_backward_pde_fixed(b1, unit_a, lambda, 4.0, o);
    double err = 0;
    for (std::size_t i = 0; i < sol.u.nx(); ++i) err = std::max(err, std::abs(sol.u.at(0, i) - us(sol.u.x(i))));
    CHECK(err < 1e-4);
  }

  TEST_CASE("transform is the identity beyond R1 and inverts inside") {
    const auto b = build("step-drift-1d", 4.0);
    const auto& z = b.transform;
    CHECK(z.R1() == doctest::Approx(16.0));
    CHECK(z.sandwich().pass);
    CHECK(!z.is_identity());
    for (double t : {0.0, 0.37, 1.0}) {
      for (double x : {-30.0, -16.0, 16.0, 17.5, 40.0}) {
        CHECK(z.phi(t, x) == x);
        CHECK(z.phi_inv(t, x) == x);
        CHECK(z.b_tilde(t, x) == b.problem.field.b(t, scalar_vec(x))(0));
        CHECK(z.sigma_tilde(t, x) == 1.0);
      }
    }
    // Interpolation tolerance: largest gap between the cubic and the linear
    // interpolant of u at cell midpoints.
    const GridTable& u = z.solution().u;
    double interp_tol = 0;
    for (std::size_t n = 0; n < u.times().size(); ++n)
      for (std::size_t i = 0; i + 1 < u.nx(); ++i)
        interp_tol = std::max(interp_tol, std::abs(u.eval_slice(n, u.x(i) + u.dx() / 2) - (u.at(n, i) + u.at(n, i + 1)) / 2));
    REQUIRE(interp_tol > 0);
    CHECK(z.inverse_error() <= 10 * interp_tol);
    for (double t : {0.0, 0.37, 1.0})
      for (int i = -150; i <= 150; ++i) {
        const double y = i * 0.1 + 0.013;
        CHECK(std::abs(z.phi(t, z.phi_inv(t, y)) - y) <= 10 * interp_tol);
      }
    // Phi' lies in [1/2, 3/2].
    for (int i = -200; i <= 200; ++i) {
      const double d = z.phi_dx(0.5, i * 0.1);
      CHECK(d >= 0.5);
      CHECK(d <= 1.5);
    }
  }

  TEST_CASE("vanishing compact part gives an exact identity conjugacy") {
    const auto b = build("bm(1)", 4.0);
    CHECK(b.transform.is_identity());
    SimulationConfig c;
    c.dt = 1e-2;
    c.horizon = 1.0;
    c.n_paths = 50;
    c.seed = 41;
    const auto r = conjugacy_check(b.problem, b.transform, c, 0.3);
    CHECK(r.max == 0.0);
    CHECK(r.excluded_fraction == 0.0);
  }

  TEST_CASE("conjugacy error shrinks with the step size") {
    const auto b = build("step-drift-1d", 4.0);
    SimulationConfig c;
    c.horizon = 1.0;
    c.n_paths = 200;
    c.seed = 42;
    const auto ref = conjugacy_refinement(b.problem, b.transform, c, 0.5, {0.02, 0.01, 0.005});
    REQUIRE(ref.levels.size() == 3);
    CHECK(ref.monotone);
    CHECK(ref.levels[2].median < ref.levels[0].median);
  }

  TEST_CASE("solution file round trip") {
    const auto s = split_drift(preset("step-drift-1d"), 4.0);
    const auto sol = solve_backward_pde_fixed(s.b1, unit_a, 2.0, 4.0, small_options());
    std::stringstream ss;
    write_solution(sol, ss);
    const auto back = read_solution(ss);
    CHECK(back.lambda == sol.lambda);
    CHECK(back.R0 == sol.R0);
    CHECK(back.u.data() == sol.u.data());
    CHECK(back.u.times() == sol.u.times());
    CHECK(back.u.eval(0.3, 1.7) == sol.u.eval(0.3, 1.7));
    std::stringstream bad("ZVK2");
    CHECK_THROWS_AS(read_solution(bad), Error);
  }

  TEST_CASE("acceptance persists when lambda doubles") {
    const auto s = split_drift(preset("step-drift-1d"), 4.0);
    const auto sol = solve_backward_pde(s.b1, unit_a, 4.0, small_options());
    REQUIRE(sol.accepted);
    for (double f : {2.0, 4.0}) {
      const auto again = solve_backward_pde_fixed(s.b1, unit_a, f * sol.lambda, 4.0, small_options());
      CHECK(again.accepted);
      CHECK(again.sup_u + again.sup_du <= sol.sup_u + sol.sup_du);
    }
  }
}
