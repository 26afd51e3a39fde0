#include <doctest.h>

#include <cmath>

#include "treat/verify.hpp"

using namespace treat;

TEST_SUITE("verify") {
  TEST_CASE("log-log fit recovers an exact power law") {
    const std::vector<double> x{0.1, 0.2, 0.4, 0.8, 1.6};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v * v * v);
    const auto fit = fit_loglog(x, y);
    CHECK(fit.slope == doctest::Approx(3.0));
    CHECK(fit.intercept == doctest::Approx(std::log(3.0)));
    CHECK(fit.r2 == doctest::Approx(1.0));
    CHECK(fit.reliable);
    CHECK_THROWS_AS(fit_loglog({1, 2, 3}, {1, 2, 3}), ConfigError);
    CHECK_THROWS_AS(fit_loglog({1, 2, 3, 4}, {1, 0, 3, 4}), ConfigError);
  }

  TEST_CASE("round trip is exact for a zero-step horizon and fourth order under RK4") {
    const auto spec = SystemSpec::defaults(SystemKind::simple_spring, 1);
    const StateVector s0(1, 2, 2, {1.0, -0.5, 0.2, 0.3});
    CHECK(lemma1_roundtrip(spec, s0, Scheme::rk4, 0.1, 0.0) == 0.0);
    auto stiff = spec;
    stiff.spring_k = 100.0;
    const auto sweep = lemma1_sweep(stiff, s0, Scheme::rk4, {4e-3, 2e-3, 1e-3}, 1.0);
    REQUIRE(sweep.ratios.size() == 2);
    for (double r : sweep.ratios) CHECK(r > 12.0);
    CHECK_THROWS_AS(lemma1_roundtrip(SystemSpec::defaults(SystemKind::attractor),
                                     StateVector(1, 3, 0, {0, 0, 1}), Scheme::rk4, 0.1, 1.0),
                    UnsupportedSystemError);
  }

  TEST_CASE("damped round trip does not vanish with the step") {
    const auto spec = SystemSpec::defaults(SystemKind::damped_spring, 1);
    const StateVector s0(1, 2, 2, {1.0, 0.0, 0.0, 0.5});
    const double a = lemma1_roundtrip(spec, s0, Scheme::rk4, 1e-3, 0.5);
    const double b = lemma1_roundtrip(spec, s0, Scheme::rk4, 5e-4, 0.5);
    CHECK(a > 1e-3);
    CHECK(b == doctest::Approx(a).epsilon(0.1));
  }

  TEST_CASE("scaling cell under a vanishing step approaches the oracle") {
    ScalingConfig cfg;
    cfg.scheme = Scheme::rk4;
    const auto cell = scaling_cell(cfg, 0.01, 4.0);
    CHECK(cell.l_pred < 1e-14);
    CHECK(cell.l_reverse < 1e-14);
    cfg.scheme = Scheme::euler;
    const auto coarse = scaling_cell(cfg, 0.1, 4.0);
    const auto fine = scaling_cell(cfg, 0.05, 4.0);
    CHECK(coarse.l_pred > fine.l_pred);
    CHECK(coarse.l_reverse > fine.l_reverse);
  }

  TEST_CASE("max-error construction") {
    const auto p = lemma2_construction_check(0.3, 0.4);
    CHECK(p.treat == doctest::Approx(0.4));
    CHECK(p.rev2 == doctest::Approx(0.7));
    const auto q = lemma2_construction_check(0.9, 0.0);
    CHECK(q.treat == doctest::Approx(0.9));
    CHECK(q.rev2 == doctest::Approx(0.9));
    CHECK_THROWS_AS(lemma2_construction_check(-0.1, 0.2), ConfigError);
    CHECK(lemma2_property_violations(10000, 3) == 0);
  }

  TEST_CASE("energy checks per spring kind") {
    EnergyCheckConfig cfg;
    cfg.n_trajectories = 2;
    cfg.steps = 1000;
    cfg.n_samples = 100;
    for (auto kind : {SystemKind::simple_spring, SystemKind::forced_spring, SystemKind::damped_spring}) {
      const auto r = energy_classification_check(SystemSpec::defaults(kind, 3), cfg);
      CAPTURE(to_string(kind));
      CHECK(r.passed);
    }
    CHECK_THROWS_AS(energy_classification_check(SystemSpec::defaults(SystemKind::triple_pendulum), cfg),
                    UnsupportedSystemError);
  }

  TEST_CASE("Lyapunov estimate is near zero for the oscillator and positive for the pendulum") {
    LyapunovConfig cfg;
    cfg.n_trajectories = 3;
    cfg.n_points = 30;
    const auto spring = lyapunov_mle(SystemSpec::defaults(SystemKind::simple_spring, 1),
                                     spring_reference_state(SystemSpec::defaults(SystemKind::simple_spring, 1), 1), cfg);
    const auto pend = lyapunov_mle(SystemSpec::defaults(SystemKind::triple_pendulum),
                                   pendulum_reference_state(), cfg);
    CHECK(pend.mean > spring.mean);
    CHECK(spring.mean < 0.5);
  }

  TEST_CASE("unknown suite is a config error") {
    CHECK_THROWS_AS(run_suite("lemma3"), ConfigError);
    const auto r = run_suite("lemma2");
    CHECK(r.passed());
    CHECK(to_csv({r}).rfind("suite,name,value\n", 0) == 0);
  }
}
