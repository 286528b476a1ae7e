#include "flowlab/coefficients.hpp"
#include "flowlab/occupation.hpp"

#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
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

double unit_ball(double, const Vec& x) { return x.norm() <= 1.0 ? 1.0 : 0.0; }

}  // namespace

TEST_SUITE("occupation") {
  TEST_CASE("expected time of brownian motion in the unit interval") {
    // P(|W_t| <= 1) = erf(1 / sqrt(2t)); integrate over (0, 1].
    const double exact = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [](double t) { return t <= 0 ? 1.0 : std::erf(1.0 / std::sqrt(2 * t)); }, 0.0, 1.0, 15, 1e-12);
    const auto streamed = occupation_integral(preset("bm(1)"), cfg(1e-3, 1.0, 20000, 31), scalar_vec(0.0), unit_ball);
    // Left-endpoint quadrature adds an O(dt) bias.
    CHECK(std::abs(streamed.value - exact) < 4 * streamed.std_error + 2e-3);

    auto c = cfg(1e-3, 1.0, 20000, 31);
    c.record_stride = 1;
    const auto e = simulate(preset("bm(1)"), c, scalar_vec(0.0));
    const auto recorded = occupation_integral(e, unit_ball);
    CHECK(recorded.value == doctest::Approx(streamed.value).epsilon(1e-12));
  }

  TEST_CASE("per-path integrals of a constant are the stopped horizon") {
    const auto s = occupation_samples(preset("bm(1)").field, cfg(1e-2, 1.0, 100, 32), scalar_vec(0.0),
                                      {[](double, const Vec&) { return 1.0; }, [](double t, const Vec&) { return t; }});
    REQUIRE(s.integrals.size() == 2);
    for (double v : s.integrals[0]) CHECK(v == doctest::Approx(1.0));
    // Left-endpoint rule for int_0^1 t dt on 100 steps.
    for (double v : s.integrals[1]) CHECK(v == doctest::Approx(0.495));
    const auto stopped = occupation_samples(preset("bm(1)").field, cfg(1e-2, 1.0, 100, 32), scalar_vec(0.0),
                                            {[](double, const Vec&) { return 1.0; }}, 0.5);
    for (double v : stopped.integrals[0]) CHECK(v <= 1.0 + 1e-12);
  }

  TEST_CASE("lq norm of a constant on a box") {
    KrylovBox box;
    box.t0 = 0;
    box.t1 = 1;
    box.lo = -1;
    box.hi = 1;
    box.nodes_per_axis = 20;
    const SpaceTimeFn two = [](double, const Vec&) { return 2.0; };
    CHECK(lq_norm_on_box(two, 2.0, 1, box) == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(lq_norm_on_box(two, 3.0, 2, box) == doctest::Approx(2.0 * std::cbrt(4.0)));
  }

  TEST_CASE("khasminskii bound for a small occupation") {
    const auto r = khasminskii_check(preset("bm(1)"), cfg(1e-2, 0.5, 4000, 33), unit_ball, 1.0,
                                     {scalar_vec(-1.0), scalar_vec(0.0), scalar_vec(1.0)});
    CHECK(r.applicable);
    CHECK(r.c < 1.0);
    CHECK(r.pass);
    for (const auto& p : r.points) CHECK(p.lhs <= p.rhs + 3 * p.diff_se);
  }

  TEST_CASE("local exponential occupation of a constant is deterministic") {
    const auto r = local_exp_occupation_check(preset("bm(1)"), cfg(1e-2, 0.7, 200, 34), scalar_vec(0.0),
                                              [](double, const Vec&) { return 1.0; }, 100.0, 400);
    CHECK(r.estimate == doctest::Approx(std::exp(0.7)));
    CHECK(r.reference == doctest::Approx(std::exp(0.7)));
    CHECK(r.stable);
  }

  TEST_CASE("krylov ratios for a scaled family") {
    std::vector<KrylovMember> fam;
    for (double s : {1.0, 2.0, 4.0})
      fam.push_back({"scale" + std::to_string(int(s)), [s](double, const Vec& x) { return s * (x.norm() <= 1.0); }, std::nullopt});
    KrylovBox box;
    box.lo = -3;
    box.hi = 3;
    const auto r = krylov_ratio(preset("bm(1)"), cfg(1e-2, 1.0, 2000, 35), scalar_vec(0.0), fam, 2.0, box);
    REQUIRE(r.rows.size() == 3);
    // Linear in the scale, so every ratio is the same.
    CHECK(r.rows[1].ratio == doctest::Approx(r.rows[0].ratio).epsilon(1e-9));
    CHECK(r.rows[2].ratio == doctest::Approx(r.rows[0].ratio).epsilon(1e-9));
    CHECK(r.bounded);
  }

  TEST_CASE("khasminskii bound is not declared when c >= 1") {
    const auto r = khasminskii_check(preset("bm(1)"), cfg(1e-2, 1.0, 2000, 36),
                                     [](double, const Vec& x) { return x.norm() <= 1.0 ? 5.0 : 0.0; }, 1.0,
                                     {scalar_vec(0.0)});
    CHECK(!r.applicable);
    CHECK(!r.pass);
    CHECK(r.verdict != Verdict::Pass);
  }
}
