#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treat/dynamics.hpp"
#include "treat/physics.hpp"

namespace treat {

// ---------------------------------------------------------------------------
// Reversal round trip

/// Integrate forward over T, flip momenta, integrate forward over T again with
/// the same vector field (clock continuing from -T), flip back. Returns the
/// max-abs distance to `state0`. Systems without momenta throw
/// UnsupportedSystemError.
double lemma1_roundtrip(const SystemSpec& spec, const StateVector& state0, Scheme scheme,
                        double dt, double T);

struct RoundtripSweep {
  SystemKind system = SystemKind::simple_spring;
  Scheme scheme = Scheme::rk4;
  double T = 0.0;
  std::vector<double> dts;
  std::vector<double> discrepancies;
  /// discrepancies[i] / discrepancies[i + 1].
  std::vector<double> ratios;
};

RoundtripSweep lemma1_sweep(const SystemSpec& spec, const StateVector& state0, Scheme scheme,
                            const std::vector<double>& dts, double T);

nlohmann::ordered_json to_json(const RoundtripSweep& sweep);

// ---------------------------------------------------------------------------
// Loss scaling on the one-body oscillator

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// False when r2 < 0.98; the slope is then not to be asserted.
  bool reliable = false;
};

/// Least-squares line through (ln x, ln y). Needs at least 4 positive points.
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingConfig {
  Scheme scheme = Scheme::euler;
  double k = 0.1;
  double m = 1.0;
  double q0 = 1.0;
  double p0 = 0.3;
  double tau = 1.0;                                  // observation spacing
  double fixed_T = 10.0;                             // horizon for the step sweep
  std::vector<double> dts{0.1, 0.05, 0.025, 0.0125};
  double fixed_dt = 0.05;                            // step for the horizon sweep
  std::vector<double> Ts{2.0, 4.0, 8.0, 16.0};
};

struct ScalingCell {
  double dt = 0.0;
  double T = 0.0;
  double l_pred = 0.0;
  double l_reverse = 0.0;
};

struct ScalingReport {
  Scheme scheme = Scheme::euler;
  std::vector<ScalingCell> dt_sweep;  // fixed T
  std::vector<ScalingCell> T_sweep;   // fixed dt
  LogLogFit pred_vs_dt, rev_vs_dt, pred_vs_T, rev_vs_T;
  /// l_reverse / (T^5 dt^4) for each cell of the step sweep.
  std::vector<double> rev_envelope;
};

/// Prediction and reversal losses of one rollout measured on the observation
/// grid t_k = k * tau, k = 0..T/tau. The prediction loss is taken against the
/// analytic solution; the reversal loss pairs forward index k with reverse
/// index K - k.
ScalingCell scaling_cell(const ScalingConfig& cfg, double dt, double T);

/// Throws ConfigError when either sweep has fewer than 4 points or a step
/// does not divide the observation spacing.
ScalingReport theorem1_scaling(const ScalingConfig& cfg);

nlohmann::ordered_json to_json(const LogLogFit& fit);
nlohmann::ordered_json to_json(const ScalingReport& report);
/// Flat rows: sweep,scheme,dt,T,l_pred,l_reverse.
std::string to_csv(const ScalingReport& report);

// ---------------------------------------------------------------------------
// Max-error construction

struct MaxErrorPair {
  double treat = 0.0;
  double rev2 = 0.0;
};

/// One-step construction with reconstruction error a and reversal error b:
/// the forward-end reverse rollout is off by at most max(a, b), the rollout
/// started from the reversed initial state by a + b. Negative inputs throw
/// ConfigError.
MaxErrorPair lemma2_construction_check(double a, double b);

/// Number of violations of treat <= rev2 over `n` random nonnegative pairs.
std::size_t lemma2_property_violations(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Energy classification

struct EnergyCheckConfig {
  std::size_t n_trajectories = 5;
  double dt = 1e-3;
  std::size_t steps = 6000;
  std::size_t n_samples = 1000;   // sampled states for derivative identities
  double drift_tol = 1e-6;        // simple: relative energy drift
  double forcing_tol = 1e-6;      // forced: dH/dt identity
  double monotone_tol = 1e-9;     // damped: allowed increase per step
  double identity_tol = 1e-8;     // damped: dH/dt identity
  std::uint64_t seed = 11;
};

struct EnergyReport {
  SystemKind system = SystemKind::simple_spring;
  Reversibility classification = Reversibility::unknown;
  std::string claim;
  bool passed = false;
  /// Named measurements, e.g. max_relative_drift.
  std::vector<std::pair<std::string, double>> measurements;
};

/// Spring kinds only: conservation for the simple spring, the forcing
/// identity for the forced spring, monotone decay plus the dissipation
/// identity for the damped spring. Trajectories use RK4.
EnergyReport energy_classification_check(const SystemSpec& spec, const EnergyCheckConfig& cfg);

nlohmann::ordered_json to_json(const EnergyReport& report);

// ---------------------------------------------------------------------------
// Maximum Lyapunov exponent

struct LyapunovConfig {
  std::size_t n_trajectories = 10;
  double sigma = 1e-4;
  Scheme scheme = Scheme::rk4;
  double dt = 1e-3;
  std::size_t subsample = 100;
  std::size_t n_points = 60;      // subsampled points after the initial one
  std::uint64_t seed = 5;
};

struct LyapunovReport {
  SystemKind system = SystemKind::simple_spring;
  double sigma = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_excluded = 0;     // pairs with a non-finite trajectory
  double mean = 0.0;
  double std = 0.0;               // sample standard deviation
  std::vector<double> values;
};

/// Perturb `base` with N(0, sigma^2) noise n_trajectories times and average
/// lambda = max_t (1/t) ln(|delta(t)| / |delta(0)|) over all trajectory pairs,
/// t being physical time. Throws ConfigError unless sigma > 0.
LyapunovReport lyapunov_mle(const SystemSpec& spec, const StateVector& base,
                            const LyapunovConfig& cfg);

nlohmann::ordered_json to_json(const LyapunovReport& report);
/// Flat rows: system,pair,mle.
std::string to_csv(const LyapunovReport& report);

// ---------------------------------------------------------------------------
// Suites

struct SuiteCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;
  std::vector<std::pair<std::string, double>> measurements;
  nlohmann::ordered_json data = nlohmann::ordered_json::object();

  [[nodiscard]] bool passed() const;
};

/// Stiff one-body spring, triple pendulum and damped spring, RK4 over
/// dt in {1e-3, 5e-4, 2.5e-4}.
SuiteReport run_lemma1_suite();
/// Euler and Heun sweeps on the one-body simple spring.
SuiteReport run_theorem1_suite();
SuiteReport run_lemma2_suite(std::uint64_t seed = 3);
/// All three spring kinds, or only `only` when given.
SuiteReport run_energy_suite(const std::vector<SystemKind>& only = {});
/// Triple pendulum against the simple spring.
SuiteReport run_mle_suite(std::size_t workers = 1);

/// Suite by name: lemma1, theorem1, lemma2, energy, mle. ConfigError otherwise.
SuiteReport run_suite(const std::string& name, const std::vector<SystemKind>& energy_systems = {},
                      std::size_t workers = 1);

nlohmann::ordered_json to_json(const SuiteReport& report);
/// Flat rows: suite,name,value (checks as 1/0, then measurements).
std::string to_csv(const std::vector<SuiteReport>& reports);

/// Fixed initial states used by the suites.
StateVector pendulum_reference_state();
StateVector spring_reference_state(const SystemSpec& spec, std::uint64_t seed);

}  // namespace treat
