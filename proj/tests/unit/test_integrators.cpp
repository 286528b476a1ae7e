#include "flowlab/coefficients.hpp"
#include "flowlab/integrators.hpp"
#include "flowlab/parallel.hpp"
#include "flowlab/stats.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>

using namespace flowlab;

namespace {

SimulationConfig cfg(double dt, double T, std::size_t n, std::uint64_t seed = 1, Scheme s = Scheme::TamedEuler) {
  SimulationConfig c;
  c.dt = dt;
  c.horizon = T;
  c.n_paths = n;
  c.seed = seed;
  c.scheme = s;
  return c;
}

std::vector<double> finals(const PathEnsemble& e, int coord = 0) {
  std::vector<double> v;
  const std::size_t nt = e.time_grid.size();
  for (std::size_t p = 0; p < e.n_paths; ++p) v.push_back(e.states[(p * nt + nt - 1) * e.dim + coord]);
  return v;
}

}  // namespace

TEST_SUITE("integrators") {
  TEST_CASE("time grid") {
    const TimeGrid g(0.1, 1.0);
    CHECK(g.steps() == 10);
    CHECK(g.horizon() == 1.0);
    CHECK(g.index_of(0.5) == 5);
    CHECK_THROWS_AS(g.index_of(0.55), Error);
    const TimeGrid r(0.3, 1.0);
    CHECK(r.steps() == 4);
    CHECK(r.step_size(3) == doctest::Approx(0.1));
  }

  TEST_CASE("config validation") {
    auto c = cfg(1e-3, 1, 10);
    c.dt = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = cfg(1e-3, 1e-4, 10);
    CHECK_THROWS_AS(c.validate(), Error);
    c = cfg(1e-3, 1, 0);
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(scheme_from_string("drift-implicit-euler") == Scheme::DriftImplicitEuler);
    CHECK_THROWS_AS(scheme_from_string("rk4"), Error);
  }

  TEST_CASE("ou mean and variance against the closed form") {
    const auto p = preset("ou(1)");
    for (Scheme s : {Scheme::TamedEuler, Scheme::EulerMaruyama, Scheme::DriftImplicitEuler}) {
      auto c = cfg(1e-3, 1.0, 20000, 4, s);
      c.record_stride = 1000;
      const auto e = simulate(p, c, scalar_vec(1.0));
      const auto v = finals(e);
      const auto m = stats::mean(v);
      std::vector<double> sq;
      for (double x : v) sq.push_back((x - m.value) * (x - m.value));
      const auto var = stats::mean(sq);
      CAPTURE(to_string(s));
      CHECK(std::abs(m.value - std::exp(-1.0)) < 4 * m.std_error + 1e-3);
      CHECK(std::abs(var.value - (1 - std::exp(-2.0)) / 2) < 4 * var.std_error + 1e-3);
    }
  }

  TEST_CASE("brownian increments are exact for bm") {
    const auto p = preset("bm(2)");
    auto c = cfg(0.01, 1.0, 20000, 8);
    c.record_stride = 100;
    const auto e = simulate(p, c, make_vec({0.0, 0.0}));
    for (int i = 0; i < 2; ++i) {
      const auto v = finals(e, i);
      std::vector<double> sq;
      for (double x : v) sq.push_back(x * x);
      const auto s = stats::mean(sq);
      CHECK(std::abs(s.value - 1.0) < 4 * s.std_error);
    }
  }

  TEST_CASE("synchronous coupling of ou contracts deterministically") {
    // Differences of the linear Euler scheme follow (1 - h)^k exactly.
    const auto p = preset("ou(1)");
    auto c = cfg(0.01, 1.0, 8, 3, Scheme::EulerMaruyama);
    const std::vector<std::pair<Vec, Vec>> pairs{{scalar_vec(0.7), scalar_vec(0.2)}};
    const auto e = coupled_simulate(p, c, pairs);
    REQUIRE(e.coupling.synchronous());
    const std::size_t nt = e.time_grid.size();
    for (std::size_t q = 0; q < c.n_paths; ++q)
      for (std::size_t k = 0; k < nt; k += 10)
        CHECK(e.coupling.pair_differences[q * nt + k] == doctest::Approx(0.5 * std::pow(0.99, double(k))).epsilon(1e-12));
  }

  TEST_CASE("drift-implicit coupling for ou") {
    const auto p = preset("ou(1)");
    auto c = cfg(0.01, 1.0, 4, 3, Scheme::DriftImplicitEuler);
    const std::vector<std::pair<Vec, Vec>> pairs{{scalar_vec(1.0), scalar_vec(0.0)}};
    const auto e = coupled_simulate(p, c, pairs);
    const std::size_t nt = e.time_grid.size();
    CHECK(e.coupling.pair_differences[nt - 1] == doctest::Approx(std::pow(1.01, -100.0)).epsilon(1e-9));
  }

  TEST_CASE("coupled pair members are the uncoupled paths") {
    const auto p = preset("example1(0.4)");
    auto c = cfg(1e-3, 0.5, 3, 9);
    const std::vector<std::pair<Vec, Vec>> pairs{{scalar_vec(0.3), scalar_vec(-0.4)}};
    const auto e = coupled_simulate(p, c, pairs);
    const std::size_t nt = e.time_grid.size();
    for (std::size_t q = 0; q < 3; ++q) {
      const double x = e.states[((2 * q) * nt + nt - 1)];
      const double y = e.states[((2 * q + 1) * nt + nt - 1)];
      CHECK(x - y == doctest::Approx(e.coupling.pair_differences[q * nt + nt - 1]).epsilon(1e-9));
    }
  }

  TEST_CASE("euler-maruyama explodes from far out while tamed euler does not") {
    const auto p = preset("example1(0.4)");
    auto c = cfg(0.01, 1.0, 500, 2, Scheme::EulerMaruyama);
    c.record_stride = 100;
    std::size_t exploded = 0;
    for (const auto& s : simulate(p, c, scalar_vec(4.0)).status) exploded += s.exploded;
    CHECK(exploded > 0);
    c.scheme = Scheme::TamedEuler;
    exploded = 0;
    for (const auto& s : simulate(p, c, scalar_vec(4.0)).status) exploded += s.exploded;
    CHECK(exploded == 0);
  }

  TEST_CASE("frozen paths keep the last finite state") {
    const auto p = preset("example1(0.4)");
    auto c = cfg(0.01, 0.2, 1, 2, Scheme::EulerMaruyama);
    c.explosion_cap = 1e3;
    const auto e = simulate(p, c, scalar_vec(5.0));
    REQUIRE(e.status[0].exploded);
    const std::size_t nt = e.time_grid.size();
    const double last = e.states[nt - 1];
    CHECK(std::isfinite(last));
    CHECK(e.states[e.status[0].exit_index] == last);
    const auto exits = first_exit(e, 1e3, c.explosion_cap);
    CHECK(exits[0] <= e.time_grid[e.status[0].exit_index]);
  }

  TEST_CASE("results do not depend on the worker count") {
    const auto p = preset("example1(0.4)");
    auto c = cfg(1e-3, 1.0, 300, 5);
    c.record_stride = 50;
    parallel::set_worker_count(1);
    const auto a = simulate(p, c, scalar_vec(1.0));
    parallel::set_worker_count(8);
    const auto b = simulate(p, c, scalar_vec(1.0));
    parallel::set_worker_count(0);
    CHECK(a.states == b.states);
  }

  TEST_CASE("binary round trip") {
    const auto p = preset("ou(2)");
    auto c = cfg(0.01, 0.5, 7, 5);
    c.store_increments = true;
    c.record_stride = 3;
    const auto e = simulate(p, c, make_vec({1.0, -1.0}));
    std::stringstream s;
    write_binary(e, s);
    const auto r = read_binary(s);
    CHECK(r.states == e.states);
    CHECK(r.time_grid == e.time_grid);
    CHECK(r.n_paths == e.n_paths);
    std::stringstream bad("XXXX");
    CHECK_THROWS_AS(read_binary(bad), Error);
  }

  TEST_CASE("first exit of a brownian path from a ball") {
    const auto p = preset("bm(1)");
    auto c = cfg(1e-3, 1.0, 2000, 6);
    c.record_stride = 1;
    const auto e = simulate(p, c, scalar_vec(0.0));
    const auto t = first_exit(e, 1.0, c.explosion_cap);
    std::size_t before = 0;
    for (double v : t) before += v <= 1.0;
    // P(sup_{s<=1} |W_s| >= 1) = 1 - 4/pi sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2/8)
    double q = 0;
    for (int k = 0; k < 20; ++k) q += (k % 2 ? -1.0 : 1.0) / (2 * k + 1) * std::exp(-(2 * k + 1) * (2 * k + 1) * M_PI * M_PI / 8);
    const double exact = 1 - 4 / M_PI * q;
    const double phat = double(before) / 2000;
    // Discrete monitoring misses some crossings, so allow the known downward bias.
    CHECK(phat <= exact + 4 * std::sqrt(exact * (1 - exact) / 2000));
    CHECK(phat >= exact - 0.06);
  }

  TEST_CASE("states stay finite up to the freeze and constant after it") {
    const auto p = preset("example1(0.4)");
    auto c = cfg(0.02, 1.0, 64, 12, Scheme::EulerMaruyama);
    c.explosion_cap = 1e4;
    const auto e = simulate(p, c, scalar_vec(5.0));
    const std::size_t nt = e.n_times();
    std::size_t frozen = 0;
    for (std::size_t q = 0; q < e.n_paths; ++q) {
      const std::size_t k0 = e.recorded_exit(q);
      for (std::size_t k = 0; k < nt; ++k) CHECK(std::isfinite(e.state(q, k, 0)));
      if (k0 >= nt) continue;
      ++frozen;
      for (std::size_t k = k0; k < nt; ++k) CHECK(e.state(q, k, 0) == e.state(q, k0, 0));
    }
    CHECK(frozen > 0);
  }

  TEST_CASE("step count is the ceiling of T / dt") {
    for (double dt : {0.3, 0.1, 0.07, 1e-3}) {
      const TimeGrid g(dt, 1.0);
      CHECK(g.steps() == static_cast<std::size_t>(std::ceil(1.0 / dt - 1e-9)));
      CHECK(g.times().back() == 1.0);
    }
  }
}
