#include "flowlab/coefficients.hpp"
#include "flowlab/flow_regularity.hpp"

#include "doctest.h"

#include <cmath>
#include <numeric>

using namespace flowlab;

namespace {

SimulationConfig cfg(double dt, double T, std::size_t n, std::uint64_t seed, Scheme s = Scheme::TamedEuler) {
  SimulationConfig c;
  c.dt = dt;
  c.horizon = T;
  c.n_paths = n;
  c.seed = seed;
  c.scheme = s;
  return c;
}

std::vector<Vec> line(double lo, double hi, int n) {
  std::vector<Vec> g;
  for (int i = 0; i < n; ++i) g.push_back(scalar_vec(lo + (hi - lo) * i / (n - 1)));
  return g;
}

Lattice lattice1(std::size_t n, double h, double origin) {
  Lattice L;
  L.shape = {n};
  L.spacing = h;
  L.origin = scalar_vec(origin);
  return L;
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("additive noise gives the witness one half") {
    for (const char* name : {"bm(1)", "ou(1)"}) {
      const auto w = witness_fit(preset(name), cfg(1e-2, 1.0, 64, 21, Scheme::EulerMaruyama), line(-2, 2, 5), 2.0, kInfNorm);
      CAPTURE(name);
      CHECK(w.converged);
      CHECK(w.max_violation <= 1.0 + 1e-9);
      for (double g : w.g) CHECK(g == doctest::Approx(0.5).epsilon(1e-9));
      for (const auto& q : w.pairs) CHECK(q.quotient == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("witness iteration on hand-made quotients") {
    SobolevWitness w;
    w.base_grid = line(0, 2, 3);
    w.pairs = {{0, 1, 1.0, 2.0, 0.0}, {1, 2, 1.0, 1.0, 0.0}, {0, 2, 2.0, 3.0, 0.0}};
    fit_witness_values(w);
    REQUIRE(w.g.size() == 3);
    for (const auto& q : w.pairs) CHECK(q.quotient <= w.g[q.i] + w.g[q.j] + 1e-12);
    CHECK(w.max_violation <= 1.0 + 1e-12);
  }

  TEST_CASE("quotient norm of a constant difference") {
    const auto p = preset("bm(2)");
    const std::vector<std::pair<Vec, Vec>> pairs{{make_vec({1, 0}), make_vec({0, 0})}};
    const auto e = coupled_simulate(p, cfg(1e-2, 1.0, 16, 22), pairs);
    for (double r : {1.0, 2.0, kInfNorm}) {
      const auto q = quotient_norm(e, 0, 2.0, r);
      CHECK(q.value == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(q.excluded_fraction == 0.0);
    }
  }

  TEST_CASE("finite-difference jacobian of the linear scheme") {
    const double dt = 1e-2;
    const auto r = fd_gradient(preset("ou(1)"), cfg(dt, 1.0, 32, 23, Scheme::EulerMaruyama), scalar_vec(0.5), 1e-3, 2.0,
                               GradientVariant::SupOfExpectation);
    const auto& e = r.estimate;
    REQUIRE(!e.times.empty());
    for (std::size_t k = 0; k < e.times.size(); ++k) {
      const double exact = std::pow(1 - dt, std::round(e.times[k] / dt));
      CHECK(e.mean_jacobian[k][0] == doctest::Approx(exact).epsilon(1e-6));
      CHECK(e.moment[k] == doctest::Approx(exact * exact).epsilon(1e-6));
    }
    CHECK(e.sup_of_expectation == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(!e.step_size_warning);
  }

  TEST_CASE("gradient variants are ordered") {
    const auto p = preset("example1(0.4)");
    const auto a = fd_gradient(p, cfg(1e-3, 0.5, 200, 24), scalar_vec(1.0), 1e-3, 2.0, GradientVariant::SupOfExpectation);
    CHECK(a.estimate.expectation_of_sup >= a.estimate.sup_of_expectation - 1e-12);
    CHECK(gradient_variant_from_string("expectation-of-sup") == GradientVariant::ExpectationOfSup);
  }

  TEST_CASE("maximal function basics") {
    const Lattice L = lattice1(21, 0.1, -1.0);
    const std::vector<double> ones(L.size(), 1.0);
    for (double v : maximal_function(ones, L, 0.5)) CHECK(v == doctest::Approx(1.0));

    std::vector<double> g(L.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sin(7.0 * L.point(i)(0));
    const auto M = maximal_function(g, L, 0.5);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(M[i] >= std::abs(g[i]) - 1e-15);

    // Monotone in R.
    const auto M2 = maximal_function(g, L, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(M2[i] >= M[i] - 1e-15);

    std::vector<double> spike(L.size(), 0.0);
    spike[10] = 1.0;
    const auto S = maximal_function(spike, L, 0.3);
    CHECK(S[10] == 1.0);
    CHECK(S[12] == doctest::Approx(1.0 / 5));
    CHECK(S[0] == 0.0);

    CHECK_THROWS_AS(maximal_function(ones, L, 0.05), Error);
  }

  TEST_CASE("lipschitz-type inequality through the maximal function") {
    const Lattice L = lattice1(81, 0.05, -2.0);
    const auto c = maximal_inequality_check([](const Vec& x) { return std::sin(3 * x(0)); },
                                            [](const Vec& x) { return std::abs(3 * std::cos(3 * x(0))); }, L, 1.0);
    CHECK(c.pairs_checked > 0);
    CHECK(c.violations == 0);
    CHECK(c.worst_ratio <= 1.0);

    Lattice L2;
    L2.shape = {15, 15};
    L2.spacing = 0.1;
    L2.origin = make_vec({-0.7, -0.7});
    const auto c2 = maximal_inequality_check([](const Vec& x) { return x.norm(); }, [](const Vec&) { return 1.0; }, L2, 0.5);
    CHECK(c2.violations == 0);
  }

  TEST_CASE("coincident starts have zero quotient norm") {
    const std::vector<std::pair<Vec, Vec>> pairs{{scalar_vec(0.8), scalar_vec(0.8)}};
    const auto e = coupled_simulate(preset("example1(0.4)"), cfg(1e-2, 1.0, 32, 25), pairs);
    for (double r : {2.0, kInfNorm}) CHECK(quotient_norm(e, 0, 2.0, r).value == 0.0);
  }

  TEST_CASE("brownian flow derivative is the identity") {
    const auto r = fd_gradient(preset("bm(2)"), cfg(1e-2, 1.0, 16, 26), make_vec({0.3, -0.2}), 1e-3, 2.0,
                               GradientVariant::ExpectationOfSup);
    for (const auto& J : r.estimate.mean_jacobian) {
      CHECK(J[0] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(J[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
      CHECK(J[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
      CHECK(J[3] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}
