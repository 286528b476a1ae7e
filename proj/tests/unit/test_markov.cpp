#include "flowlab/coefficients.hpp"
#include "flowlab/markov_stats.hpp"

#include "doctest.h"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

using namespace flowlab;

namespace {

SimulationConfig cfg(double dt, double T, std::size_t n, std::uint64_t seed) {
  SimulationConfig c;
  c.dt = dt;
  c.horizon = T;
  c.n_paths = n;
  c.seed = seed;
  return c;
}

double Phi(double x) { return boost::math::cdf(boost::math::normal(), x); }

// P(|x0 + W_T - y0| <= a).
double bm_hit(double x0, double y0, double a, double T) {
  return Phi((y0 + a - x0) / std::sqrt(T)) - Phi((y0 - a - x0) / std::sqrt(T));
}

std::vector<Vec> line(double lo, double hi, int n) {
  std::vector<Vec> g;
  for (int i = 0; i < n; ++i) g.push_back(scalar_vec(lo + (hi - lo) * i / (n - 1)));
  return g;
}

}  // namespace

TEST_SUITE("markov") {
  TEST_CASE("semigroup of a constant") {
    const auto s = semigroup_map(preset("example1(0.4)"), cfg(1e-2, 1.0, 200, 51), [](const Vec&) { return 1.0; }, 1.0,
                                 1.0, line(-2, 2, 5));
    for (double v : s.values) CHECK(v == 1.0);
    CHECK(s.modulus == 0.0);
    CHECK(s.bounded);
  }

  TEST_CASE("heat semigroup of a half-line indicator") {
    const auto s = semigroup_map(preset("bm(1)"), cfg(1e-2, 1.0, 10000, 52),
                                 [](const Vec& y) { return y(0) > 0 ? 1.0 : 0.0; }, 1.0, 1.0, line(-1, 1, 5));
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double x = s.x_grid[i](0);
      CHECK(std::abs(s.values[i] - Phi(x)) < 4 * s.std_errors[i]);
    }
    // The modulus approximates sup Phi' = 1 / sqrt(2 pi) from below on this grid.
    CHECK(s.modulus < 0.45);
    CHECK(s.modulus > 0.3);
  }

  TEST_CASE("refinement keeps the modulus stable") {
    const auto r = semigroup_refinement(preset("bm(1)"), cfg(1e-2, 1.0, 4000, 53),
                                        [](const Vec& y) { return y(0) > 0 ? 1.0 : 0.0; }, 1.0, 1.0, line(-1, 1, 5),
                                        line(-1, 1, 9));
    CHECK(r.stable);
    CHECK(r.verdict == Verdict::Pass);
  }

  TEST_CASE("naive hitting probability of brownian motion") {
    const auto e = hitting_probability(preset("bm(1)"), cfg(1e-2, 1.0, 20000, 54), scalar_vec(0.0), scalar_vec(1.0), 0.5, 1.0);
    const double exact = bm_hit(0, 1, 0.5, 1);
    CHECK(std::abs(e.p_hat - exact) < 4 * e.std_error);
    CHECK(e.ci_low <= e.p_hat);
    CHECK(e.p_hat <= e.ci_high);
    CHECK(e.ess == doctest::Approx(20000));
    CHECK(e.verdict == Verdict::Pass);
  }

  TEST_CASE("no successes is unresolved") {
    const auto e = hitting_probability(preset("bm(1)"), cfg(1e-2, 1.0, 500, 55), scalar_vec(0.0), scalar_vec(10.0), 0.1, 1.0);
    CHECK(e.successes == 0);
    CHECK(e.verdict == Verdict::Unresolved);
    CHECK(!e.warnings.empty());
    CHECK(e.ci_low == 0.0);
  }

  TEST_CASE("steering control inverts the diffusion") {
    Mat s(2, 2);
    s << 2, 0, 1, 1;
    const Vec y = make_vec({1, 2}), y0 = make_vec({0, 0});
    const Vec U = steering_control(s, y, y0, 3.0);
    const Vec back = s * U;
    CHECK(back(0) == doctest::Approx(-3.0));
    CHECK(back(1) == doctest::Approx(-6.0));
  }

  TEST_CASE("unsteered girsanov estimator is the naive estimator") {
    const auto c = cfg(1e-2, 1.0, 5000, 56);
    const auto n = hitting_probability(preset("bm(1)"), c, scalar_vec(0.0), scalar_vec(1.0), 0.5, 1.0);
    const auto g = girsanov_hitting(preset("bm(1)"), c, scalar_vec(0.0), scalar_vec(1.0), 0.5, 1.0, 0.0);
    CHECK(g.p_hat == doctest::Approx(n.p_hat).epsilon(1e-12));
    CHECK(g.ess == doctest::Approx(5000.0));
  }

  TEST_CASE("steered estimator is unbiased and more efficient for a far target") {
    const double x0 = 0, y0 = 3, a = 0.25, T = 1;
    const double exact = bm_hit(x0, y0, a, T);
    const auto c = cfg(1e-2, T, 20000, 57);
    const auto naive = hitting_probability(preset("bm(1)"), c, scalar_vec(x0), scalar_vec(y0), a, T);
    for (double m : {0.5, 1.0}) {
      const auto g = girsanov_hitting(preset("bm(1)"), c, scalar_vec(x0), scalar_vec(y0), a, T, m);
      CAPTURE(m);
      // Discrete steering weights carry an O(dt) bias on top of the noise.
      CHECK(std::abs(g.p_hat - exact) < 4 * g.std_error + 0.05 * exact);
      CHECK(g.std_error < naive.std_error);
      CHECK(g.ci_low >= 0.0);
      CHECK(g.ci_low <= g.p_hat);
      CHECK(g.ess <= 20000.0 + 1e-6);
      CHECK(g.ess > 0.0);
    }
  }

  TEST_CASE("method names") {
    CHECK(std::string(to_string(HittingMethod::Naive)) == "naive");
    CHECK(std::string(to_string(HittingMethod::Girsanov)) == "girsanov");
  }
}
