#include <doctest.h>

#include <cmath>

#include "treat/physics.hpp"

using namespace treat;

namespace {

StateVector pendulum_state(double t0, double t1, double t2, double p0, double p1, double p2) {
  return StateVector(3, 1, 1, {t0, p0, t1, p1, t2, p2});
}

}  // namespace

TEST_SUITE("physics") {
  TEST_CASE("anchored spring derivative and energy") {
    auto spec = SystemSpec::defaults(SystemKind::simple_spring, 1);
    spec.mass = 2.0;
    spec.spring_k = 0.5;
    const StateVector s(1, 2, 2, {1.0, -2.0, 0.4, 0.6});
    const auto d = eval_derivative(spec, s, 0.0);
    CHECK(d[0] == doctest::Approx(0.2));
    CHECK(d[1] == doctest::Approx(0.3));
    CHECK(d[2] == doctest::Approx(-0.5));
    CHECK(d[3] == doctest::Approx(1.0));
    const auto e = hamiltonian(spec, s, 0.0);
    CHECK(e.kinetic == doctest::Approx((0.16 + 0.36) / 4.0));
    CHECK(e.potential == doctest::Approx(0.25 * 5.0));
  }

  TEST_CASE("pairwise spring forces sum to zero and match the pair potential") {
    auto spec = SystemSpec::defaults(SystemKind::simple_spring, 3);
    spec.dim = 1;
    CHECK_FALSE(spec.anchored);
    CHECK(spec.coupling.edge_count() == 3);
    const StateVector s(3, 1, 1, {0.0, 0.1, 1.0, 0.2, 3.0, -0.3});
    const auto d = eval_derivative(spec, s, 0.0);
    CHECK(d[1] + d[3] + d[5] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(-0.1 * ((0.0 - 1.0) + (0.0 - 3.0))));
    const auto e = hamiltonian(spec, s, 0.0);
    CHECK(e.potential == doctest::Approx(0.05 * (1.0 + 9.0 + 4.0)));
  }

  TEST_CASE("damping and forcing terms") {
    const StateVector s(1, 1, 1, {0.5, 2.0});
    auto damped = SystemSpec::defaults(SystemKind::damped_spring, 1);
    damped.dim = 1;
    CHECK(eval_derivative(damped, s, 0.0)[1] == doctest::Approx(-0.1 * 0.5 - 10.0 * 2.0));
    CHECK(dissipation_rate(damped, s) == doctest::Approx(10.0 * 4.0));
    auto forced = SystemSpec::defaults(SystemKind::forced_spring, 1);
    forced.dim = 1;
    const double t = 0.7;
    CHECK(eval_derivative(forced, s, t)[1] ==
          doctest::Approx(-0.1 * 0.5 - 10.0 * std::cos(t)));
    CHECK(hamiltonian(forced, s, t).time_dependent == doctest::Approx(0.5 * 10.0 * std::cos(t)));
  }

  TEST_CASE("spring analytic solution satisfies the equations of motion") {
    const double k = 0.3, m = 1.5, q0 = 0.8, p0 = -0.2;
    for (double t : {0.0, 0.5, 3.0}) {
      const double h = 1e-5;
      const auto [q, p] = analytic_solution_simple_spring_1d(q0, p0, k, m, t);
      const auto [qp, pp] = analytic_solution_simple_spring_1d(q0, p0, k, m, t + h);
      const auto [qm, pm] = analytic_solution_simple_spring_1d(q0, p0, k, m, t - h);
      CHECK((qp - qm) / (2 * h) == doctest::Approx(p / m).epsilon(1e-8));
      CHECK((pp - pm) / (2 * h) == doctest::Approx(-k * q).epsilon(1e-8));
    }
    const auto [qa, pa] = analytic_solution_simple_spring_1d(q0, p0, k, m, 0.0);
    CHECK(qa == doctest::Approx(q0));
    CHECK(pa == doctest::Approx(p0));
  }

  TEST_CASE("pendulum mass matrix is symmetric positive definite") {
    const auto spec = SystemSpec::defaults(SystemKind::triple_pendulum);
    const auto s = pendulum_state(0.3, -1.1, 2.0, 0.4, 0.1, -0.2);
    const auto M = pendulum_mass_matrix(spec, s);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(M[i][j] == doctest::Approx(M[j][i]));
    CHECK(M[0][0] > 0);
    CHECK(M[0][0] * M[1][1] - M[0][1] * M[1][0] > 0);
    const auto w = pendulum_angular_velocity(spec, s);
    for (int i = 0; i < 3; ++i) {
      double p = 0;
      for (int j = 0; j < 3; ++j) p += M[i][j] * w[j];
      CHECK(p == doctest::Approx(s.p(i)[0]).epsilon(1e-12));
    }
  }

  TEST_CASE("pendulum equations are Hamilton's equations of its energy") {
    const auto spec = SystemSpec::defaults(SystemKind::triple_pendulum);
    const auto s = pendulum_state(0.3, -1.1, 2.0, 0.4, 0.1, -0.2);
    const auto d = eval_derivative(spec, s, 0.0);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
      auto sp = s, sm = s;
      sp.p(i)[0] += h;
      sm.p(i)[0] -= h;
      const double dH_dp = (pendulum_energy(spec, sp) - pendulum_energy(spec, sm)) / (2 * h);
      CHECK(d.q(i)[0] == doctest::Approx(dH_dp).epsilon(1e-7));
      sp = s;
      sm = s;
      sp.q(i)[0] += h;
      sm.q(i)[0] -= h;
      const double dH_dq = (pendulum_energy(spec, sp) - pendulum_energy(spec, sm)) / (2 * h);
      CHECK(d.p(i)[0] == doctest::Approx(-dH_dq).epsilon(1e-7));
    }
  }

  TEST_CASE("pendulum energy is conserved by a fine RK4 integration") {
    const auto spec = SystemSpec::defaults(SystemKind::triple_pendulum);
    const auto s0 = pendulum_state(1.5, 1.2, -0.9, 0.0, 0.0, 0.0);
    const auto traj = integrate(derivative_fn(spec), s0, TimeGrid(0.0, 1e-3, 2000), Scheme::rk4);
    const double e0 = pendulum_energy(spec, s0);
    const double e1 = pendulum_energy(spec, traj.states.back());
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-8);
  }

  TEST_CASE("attractor vector field") {
    const auto spec = SystemSpec::defaults(SystemKind::attractor);
    CHECK(spec.dp() == 0);
    const StateVector s(1, 3, 0, {0.5, -1.0, 2.0});
    const auto d = eval_derivative(spec, s, 0.0);
    CHECK(d[0] == doctest::Approx(1.0 - 2.0));
    CHECK(d[1] == doctest::Approx(-1.0));
    CHECK(d[2] == doctest::Approx(1.0 - 4.0));
    CHECK_THROWS_AS(hamiltonian(spec, s, 0.0), UnsupportedSystemError);
  }

  TEST_CASE("reversibility classes") {
    using R = Reversibility;
    CHECK(classify_reversibility(SystemSpec::defaults(SystemKind::simple_spring)) ==
          R::conservative_reversible);
    CHECK(classify_reversibility(SystemSpec::defaults(SystemKind::triple_pendulum)) ==
          R::conservative_reversible);
    CHECK(classify_reversibility(SystemSpec::defaults(SystemKind::forced_spring)) ==
          R::nonconservative_reversible);
    CHECK(classify_reversibility(SystemSpec::defaults(SystemKind::attractor)) ==
          R::nonconservative_reversible);
    CHECK(classify_reversibility(SystemSpec::defaults(SystemKind::damped_spring)) ==
          R::nonconservative_irreversible);
  }

  TEST_CASE("spec json round trip and validation") {
    auto spec = SystemSpec::defaults(SystemKind::damped_spring, 4);
    spec.friction = 2.5;
    const auto back = system_spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    CHECK(back.kind == spec.kind);
    CHECK(back.friction == spec.friction);
    CHECK(back.coupling == spec.coupling);
    spec.mass = -1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    CHECK_THROWS_AS(parse_system_kind("lorenz"), ConfigError);
    CHECK_THROWS_AS(InteractionGraph::from_adjacency(2, {0, 1, 0, 0}), ConfigError);
  }
}
