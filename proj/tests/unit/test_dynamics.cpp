#include <doctest.h>

#include <cmath>
#include <limits>

#include "treat/dynamics.hpp"

using namespace treat;

namespace {

StateVector decay_state(double v) { return StateVector(1, 1, 0, {v}); }

double decay_error(Scheme scheme, double dt) {
  const DerivativeFn f = [](const StateVector& s, double) { return -1.0 * s; };
  const auto n = static_cast<std::size_t>(std::lround(1.0 / dt));
  const auto traj = integrate(f, decay_state(1.0), TimeGrid(0.0, dt, n), scheme);
  return std::abs(traj.states.back()[0] - std::exp(-1.0));
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("state layout and the reversing operator") {
    const std::vector<double> q{1, 2, 3, 4}, p{5, 6, 7, 8};
    const auto s = StateVector::from_qp(2, 2, 2, q, p);
    CHECK(s.values()[0] == 1);
    CHECK(s.values()[2] == 5);
    CHECK(s.p(1)[1] == 8);
    const auto r = reverse_state(s);
    CHECK(r.q(1)[0] == 3);
    CHECK(r.p(0)[0] == -5);
    CHECK(reverse_state(r) == s);
    CHECK(s.component_name(6) == "agent 1 p[0]");
  }

  TEST_CASE("time grid reverse pairing") {
    const TimeGrid g(0.5, 0.25, 8);
    CHECK(g.n_points() == 9);
    CHECK(g.span() == doctest::Approx(2.0));
    for (std::size_t k = 0; k <= 8; ++k) {
      CHECK(g.reverse_time(8 - k) == doctest::Approx(g.span() - g.time(k)));
    }
  }

  TEST_CASE("single steps match hand-computed updates") {
    const auto f = [](const StateVector& s, double) { return -1.0 * s; };
    const auto x = decay_state(1.0);
    CHECK(euler_step(f, x, 0.0, 0.1)[0] == doctest::Approx(0.9));
    CHECK(heun_step(f, x, 0.0, 0.1)[0] == doctest::Approx(1 - 0.1 + 0.005));
    const double h = 0.1;
    CHECK(rk4_step(f, x, 0.0, h)[0] ==
          doctest::Approx(1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24).epsilon(1e-14));
  }

  TEST_CASE("global error orders on exponential decay") {
    for (auto [scheme, order] : {std::pair{Scheme::euler, 1.0}, std::pair{Scheme::heun, 2.0},
                                 std::pair{Scheme::rk4, 4.0}}) {
      const double e1 = decay_error(scheme, 0.02);
      const double e2 = decay_error(scheme, 0.01);
      CHECK(std::log2(e1 / e2) == doctest::Approx(order).epsilon(0.05));
    }
  }

  TEST_CASE("step_interval equals repeated steps") {
    const auto f = [](const StateVector& s, double t) { return std::cos(t) * s; };
    const auto a = step_interval(Scheme::rk4, f, decay_state(2.0), 0.3, 0.4, 4);
    auto b = decay_state(2.0);
    for (int i = 0; i < 4; ++i) b = rk4_step(f, b, 0.3 + 0.1 * i, 0.1);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
  }

  TEST_CASE("subsampled integration keeps the first state and every n-th") {
    const DerivativeFn f = [](const StateVector& s, double) { return -1.0 * s; };
    const auto full = integrate(f, decay_state(1.0), TimeGrid(0.0, 0.01, 100), Scheme::rk4);
    const auto sub =
        integrate_subsampled(f, decay_state(1.0), TimeGrid(0.0, 0.01, 100), Scheme::rk4, 10);
    REQUIRE(sub.states.size() == 11);
    for (std::size_t i = 0; i <= 10; ++i) {
      CHECK(sub.states[i] == full.states[i * 10]);
      CHECK(sub.times[i] == doctest::Approx(full.times[i * 10]));
    }
  }

  TEST_CASE("non-finite derivative reports the step") {
    const DerivativeFn f = [](const StateVector& s, double t) {
      if (t > 0.25) return std::numeric_limits<double>::quiet_NaN() * s;
      return s;
    };
    try {
      (void)integrate(f, decay_state(1.0), TimeGrid(0.0, 0.1, 10), Scheme::euler);
      FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
      CHECK(e.step() == 3);
      CHECK(e.kind() == ErrorKind::integration);
    }
  }

  TEST_CASE("scheme names round-trip") {
    for (auto s : {Scheme::euler, Scheme::heun, Scheme::rk4}) CHECK(parse_scheme(to_string(s)) == s);
    CHECK_THROWS_AS(parse_scheme("midpoint"), ConfigError);
  }
}
