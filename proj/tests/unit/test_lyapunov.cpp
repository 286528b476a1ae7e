#include "flowlab/coefficients.hpp"
#include "flowlab/lyapunov.hpp"

#include "doctest.h"

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

// E exp(c (1 + X^2)) for X ~ N(x, t).
double gaussian_exp_moment(double c, double x, double t) {
  return std::exp(c) / std::sqrt(1 - 2 * c * t) * std::exp(c * x * x / (1 - 2 * c * t));
}

}  // namespace

TEST_SUITE("lyapunov") {
  TEST_CASE("decay thresholds of the reference problems") {
    CHECK(exp_lambda_threshold(preset("bm(1)"), 1.0) == doctest::Approx(4.0));
    CHECK(poly_lambda_threshold(preset("bm(1)"), 1.0) == doctest::Approx(1.0));
    CHECK(poly_lambda_threshold(preset("ou(1)"), 1.0) == doctest::Approx(1.0));
    // p sup (2p - 1) / (1 + x^2) for brownian motion.
    CHECK(poly_lambda_threshold(preset("bm(1)"), 2.0) == doctest::Approx(6.0));
  }

  TEST_CASE("exponential moment of brownian motion matches the gaussian closed form") {
    LyapunovSpec spec;
    spec.alpha = 1.0;
    spec.lambda = 4.0;
    const std::vector<double> times{0.1, 0.25, 0.5};
    const auto reports = exp_moment_check(preset("bm(1)"), cfg(1e-2, 0.5, 40000, 11), scalar_vec(0.5), spec, times, false);
    REQUIRE(reports.size() == times.size());
    for (const auto& r : reports) {
      const double c = std::exp(-spec.lambda * r.time);
      const double exact = gaussian_exp_moment(c, 0.5, r.time);
      CAPTURE(r.time);
      CHECK(std::abs(r.estimate - exact) < 4 * r.std_error);
      CHECK(r.bound == doctest::Approx(std::exp(1.25)));
      CHECK(r.pass);
    }
  }

  TEST_CASE("polynomial moment of brownian motion") {
    const std::vector<double> times{0.5, 1.0};
    const auto reports = poly_moment_check(preset("bm(1)"), cfg(1e-2, 1.0, 40000, 12), scalar_vec(1.0), 1.0, 1.0, times, false);
    for (const auto& r : reports) {
      CHECK(std::abs(r.estimate - (2.0 + r.time)) < 4 * r.std_error);
      CHECK(r.bound == doctest::Approx(2.0 * std::exp(r.time)));
      CHECK(r.pass);
    }
  }

  TEST_CASE("the drift of example1 keeps moments below the envelope") {
    const auto p = preset("example1(0.4)");
    const double lambda = poly_lambda_threshold(p, 1.0);
    const std::vector<double> times{0.25, 1.0};
    for (const auto& r : poly_moment_check(p, cfg(1e-3, 1.0, 2000, 13), scalar_vec(2.0), 1.0, lambda, times, false))
      CHECK(r.pass);
  }

  TEST_CASE("stopped exponential functional is a supermartingale for brownian motion") {
    LyapunovSpec spec;
    spec.alpha = 1.0;
    spec.lambda = 4.0;
    const auto r = supermartingale_test(preset("bm(1)"), cfg(1e-2, 1.0, 20000, 14), scalar_vec(0.0), spec, 3.0,
                                        {0.25, 0.5, 0.75, 1.0});
    CHECK(r.pass);
    REQUIRE(r.increments.size() == r.times.size() - 1);
    for (std::size_t j = 0; j < r.increments.size(); ++j) CHECK(r.increments[j] <= 3 * r.increment_errors[j]);
  }

  TEST_CASE("steered brownian motion is an ornstein-uhlenbeck process around the target") {
    const double m = 2.0;
    SdeProblem p;
    p.field = steered_field(preset("bm(1)").field, scalar_vec(1.0), m);
    p.preset_id = "steered";
    const SteeringReport rep = steering_contraction_check(preset("bm(1)"), cfg(1e-3, 1.0, 20000, 15), scalar_vec(-1.0),
                                                          scalar_vec(1.0), {m});
    REQUIRE(rep.levels.size() == 1);
    const auto& L = rep.levels[0];
    for (std::size_t k = 0; k < L.times.size(); ++k) {
      const double t = L.times[k];
      const double exact = std::exp(-2 * m * t) * 4.0 + (1 - std::exp(-2 * m * t)) / (2 * m);
      CAPTURE(t);
      CHECK(std::abs(L.mean_sq[k] - exact) < 4 * L.std_errors[k] + 0.01 * exact);
    }
    CHECK(p.field.b(0, scalar_vec(3.0))(0) == doctest::Approx(-4.0));
  }

  TEST_CASE("moment reports follow the three standard error rule") {
    LyapunovSpec spec;
    spec.alpha = 1.0;
    spec.lambda = 0.5;  // below the threshold, so some bounds may fail
    const auto p = preset("ou(1)");
    for (const auto& r : exp_moment_check(p, cfg(1e-2, 1.0, 2000, 16), scalar_vec(1.0), spec, {0.5, 1.0}, false)) {
      CHECK(r.pass == (r.estimate <= r.bound + 3 * r.std_error));
      CHECK(r.exploded_fraction == 0.0);
    }
  }
}
