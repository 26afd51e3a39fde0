#include "treat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <stdexcept>
#include <sstream>
#include <thread>

#include "treat/data.hpp"
#include "treat/error.hpp"
#include "treat/rng.hpp"

namespace treat {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t steps_for(double span, double dt, const char* what) {
  if (!(dt > 0.0) || !(span >= 0.0)) throw ConfigError(std::string(what) + ": dt must be positive");
  const double n = std::round(span / dt);
  if (std::abs(n * dt - span) > 1e-9 * std::max(1.0, span)) {
    throw ConfigError(std::string(what) + ": step " + fmt(dt) + " does not divide " + fmt(span));
  }
  return static_cast<std::size_t>(n);
}

StateVector advance(Scheme scheme, const DerivativeFn& f, StateVector x, double t0, double span,
                    double dt) {
  const std::size_t n = steps_for(span, dt, "integration");
  for (std::size_t s = 0; s < n; ++s) {
    x = step(scheme, f, x, t0 + static_cast<double>(s) * dt, dt);
  }
  return x;
}

double l2(const StateVector& a, const StateVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double mechanical(const SystemSpec& spec, const StateVector& x) {
  return hamiltonian(spec, x, 0.0).mechanical();
}

// Exact for the quadratic mechanical energy of the spring kinds.
double energy_rate(const SystemSpec& spec, const StateVector& x, const StateVector& f) {
  const double eps = 1e-2;
  return (mechanical(spec, x + eps * f) - mechanical(spec, x - eps * f)) / (2.0 * eps);
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

nlohmann::ordered_json measurements_json(const std::vector<std::pair<std::string, double>>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

double lemma1_roundtrip(const SystemSpec& spec, const StateVector& state0, Scheme scheme,
                        double dt, double T) {
  spec.validate();
  if (spec.dp() == 0) {
    throw UnsupportedSystemError("round trip needs a momentum split; '" +
                                 std::string(to_string(spec.kind)) + "' has none");
  }
  const DerivativeFn f = derivative_fn(spec);
  StateVector x = advance(scheme, f, state0, 0.0, T, dt);
  x = reverse_state(x);
  x = advance(scheme, f, x, -T, T, dt);
  x = reverse_state(x);
  return max_abs_diff(x, state0);
}

RoundtripSweep lemma1_sweep(const SystemSpec& spec, const StateVector& state0, Scheme scheme,
                            const std::vector<double>& dts, double T) {
  RoundtripSweep out;
  out.system = spec.kind;
  out.scheme = scheme;
  out.T = T;
  out.dts = dts;
  for (double dt : dts) out.discrepancies.push_back(lemma1_roundtrip(spec, state0, scheme, dt, T));
  for (std::size_t i = 0; i + 1 < out.discrepancies.size(); ++i) {
    out.ratios.push_back(out.discrepancies[i] / out.discrepancies[i + 1]);
  }
  return out;
}

nlohmann::ordered_json to_json(const RoundtripSweep& sweep) {
  return {{"system", std::string(to_string(sweep.system))},
          {"scheme", std::string(to_string(sweep.scheme))},
          {"T", sweep.T},
          {"dts", sweep.dts},
          {"discrepancies", sweep.discrepancies},
          {"ratios", sweep.ratios}};
}

// ---------------------------------------------------------------------------

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit_loglog: x and y differ in length");
  if (x.size() < 4) throw ConfigError("fit_loglog: at least 4 points are required");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("fit_loglog: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.reliable = fit.r2 > 0.98;
  return fit;
}

ScalingCell scaling_cell(const ScalingConfig& cfg, double dt, double T) {
  SystemSpec spec = SystemSpec::defaults(SystemKind::simple_spring, 1);
  spec.dim = 1;
  spec.spring_k = cfg.k;
  spec.mass = cfg.m;
  const DerivativeFn f = derivative_fn(spec);
  const DerivativeFn minus_f = [&f](const StateVector& x, double t) { return -f(x, t); };
  const std::size_t K = steps_for(T, cfg.tau, "observation grid");
  const std::size_t sub = steps_for(cfg.tau, dt, "solver step");

  std::vector<StateVector> fwd{StateVector(1, 1, 1, {cfg.q0, cfg.p0})};
  for (std::size_t k = 0; k < K; ++k) {
    fwd.push_back(step_interval(cfg.scheme, f, fwd.back(), static_cast<double>(k) * cfg.tau,
                                cfg.tau, sub));
  }
  std::vector<StateVector> rev{fwd.back()};
  for (std::size_t k = 0; k < K; ++k) {
    rev.push_back(step_interval(cfg.scheme, minus_f, rev.back(), static_cast<double>(k) * cfg.tau,
                                cfg.tau, sub));
  }

  ScalingCell cell;
  cell.dt = dt;
  cell.T = T;
  for (std::size_t k = 0; k <= K; ++k) {
    const auto [q, p] = analytic_solution_simple_spring_1d(cfg.q0, cfg.p0, cfg.k, cfg.m,
                                                           static_cast<double>(k) * cfg.tau);
    cell.l_pred += (fwd[k][0] - q) * (fwd[k][0] - q) + (fwd[k][1] - p) * (fwd[k][1] - p);
    const double r = l2(fwd[k], rev[K - k]);
    cell.l_reverse += r * r;
  }
  return cell;
}

ScalingReport theorem1_scaling(const ScalingConfig& cfg) {
  if (cfg.dts.size() < 4 || cfg.Ts.size() < 4) {
    throw ConfigError("scaling sweeps need at least 4 points each");
  }
  ScalingReport report;
  report.scheme = cfg.scheme;
  std::vector<double> lp, lr;
  for (double dt : cfg.dts) {
    report.dt_sweep.push_back(scaling_cell(cfg, dt, cfg.fixed_T));
    lp.push_back(report.dt_sweep.back().l_pred);
    lr.push_back(report.dt_sweep.back().l_reverse);
    report.rev_envelope.push_back(report.dt_sweep.back().l_reverse /
                                  (std::pow(cfg.fixed_T, 5) * std::pow(dt, 4)));
  }
  report.pred_vs_dt = fit_loglog(cfg.dts, lp);
  report.rev_vs_dt = fit_loglog(cfg.dts, lr);
  lp.clear();
  lr.clear();
  for (double T : cfg.Ts) {
    report.T_sweep.push_back(scaling_cell(cfg, cfg.fixed_dt, T));
    lp.push_back(report.T_sweep.back().l_pred);
    lr.push_back(report.T_sweep.back().l_reverse);
  }
  report.pred_vs_T = fit_loglog(cfg.Ts, lp);
  report.rev_vs_T = fit_loglog(cfg.Ts, lr);
  return report;
}

nlohmann::ordered_json to_json(const LogLogFit& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2},
          {"reliable", fit.reliable}};
}

nlohmann::ordered_json to_json(const ScalingReport& report) {
  auto cells = [](const std::vector<ScalingCell>& cs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cs) {
      arr.push_back({{"dt", c.dt}, {"T", c.T}, {"l_pred", c.l_pred}, {"l_reverse", c.l_reverse}});
    }
    return arr;
  };
  return {{"scheme", std::string(to_string(report.scheme))},
          {"dt_sweep", cells(report.dt_sweep)},
          {"T_sweep", cells(report.T_sweep)},
          {"fits",
           {{"l_pred_vs_dt", to_json(report.pred_vs_dt)},
            {"l_reverse_vs_dt", to_json(report.rev_vs_dt)},
            {"l_pred_vs_T", to_json(report.pred_vs_T)},
            {"l_reverse_vs_T", to_json(report.rev_vs_T)}}},
          {"l_reverse_envelope", report.rev_envelope}};
}

std::string to_csv(const ScalingReport& report) {
  std::ostringstream out;
  out << "sweep,scheme,dt,T,l_pred,l_reverse\n";
  const std::string scheme(to_string(report.scheme));
  for (const auto& c : report.dt_sweep) {
    out << "dt," << scheme << ',' << fmt(c.dt) << ',' << fmt(c.T) << ',' << fmt(c.l_pred) << ','
        << fmt(c.l_reverse) << '\n';
  }
  for (const auto& c : report.T_sweep) {
    out << "T," << scheme << ',' << fmt(c.dt) << ',' << fmt(c.T) << ',' << fmt(c.l_pred) << ','
        << fmt(c.l_reverse) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

MaxErrorPair lemma2_construction_check(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw ConfigError("construction errors must be >= 0");
  // One unit step, errors measured as offsets from the ground truth. The
  // forward end point is off by a. The reverse rollout started there lands b
  // away from the forward start, which itself is exact, so its worst offset is
  // max(a, b). The rollout started from the reversed initial state is exact at
  // t0 and picks up both errors by t1.
  const double fwd_end_offset = a;
  const double rev_start_offset = b;
  const double rev2_end_offset = fwd_end_offset + rev_start_offset;
  MaxErrorPair out{std::max(fwd_end_offset, rev_start_offset), rev2_end_offset};
  if (out.treat > out.rev2) throw std::logic_error("max error construction violated");
  return out;
}

std::size_t lemma2_property_violations(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 10.0);
    const double b = rng.uniform(0.0, 10.0);
    const MaxErrorPair r = lemma2_construction_check(a, b);
    if (!(r.treat <= r.rev2) || r.treat != std::max(a, b) || r.rev2 != a + b) {
      ++violations;
    }
  }
  return violations;
}

// ---------------------------------------------------------------------------

EnergyReport energy_classification_check(const SystemSpec& spec, const EnergyCheckConfig& cfg) {
  spec.validate();
  if (!spec.is_spring()) {
    throw UnsupportedSystemError("energy classification covers spring kinds only, not '" +
                                 std::string(to_string(spec.kind)) + "'");
  }
  if (cfg.n_trajectories == 0 || cfg.steps == 0) {
    throw ConfigError("energy check needs trajectories and steps");
  }
  EnergyReport report;
  report.system = spec.kind;
  report.classification = classify_reversibility(spec);
  const DerivativeFn f = derivative_fn(spec);
  const std::size_t per_traj = (cfg.n_samples + cfg.n_trajectories - 1) / cfg.n_trajectories;
  const std::size_t stride = std::max<std::size_t>(1, cfg.steps / std::max<std::size_t>(1, per_traj));

  double max_drift = 0.0;
  double max_forcing_err = 0.0;
  double max_variation = 0.0;
  double max_identity_err = 0.0;
  double max_increase = -std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  std::size_t samples = 0;

  InitialConditionConfig ic;
  for (std::size_t traj = 0; traj < cfg.n_trajectories; ++traj) {
    Rng rng(cfg.seed, traj);
    StateVector x = sample_initial_state(spec, ic, rng);
    const double h0 = mechanical(spec, x);
    double h_prev = h0;
    for (std::size_t s = 0; s <= cfg.steps; ++s) {
      const double t = static_cast<double>(s) * cfg.dt;
      const double h = mechanical(spec, x);
      max_drift = std::max(max_drift, std::abs(h - h0) / std::max(std::abs(h0), 1e-300));
      max_variation = std::max(max_variation, std::abs(h - h0));
      if (s > 0) {
        max_increase = std::max(max_increase, h - h_prev);
        if (h - h_prev > cfg.monotone_tol) ++violations;
      }
      h_prev = h;
      if (s % stride == 0 && samples < cfg.n_samples) {
        ++samples;
        const StateVector fx = eval_derivative(spec, x, t);
        const double rate = energy_rate(spec, x, fx);
        if (spec.kind == SystemKind::forced_spring) {
          double ref = 0.0;
          for (std::size_t i = 0; i < spec.n_agents; ++i) {
            for (double qdot : fx.q(i)) ref -= qdot * spec.force_k1 * std::cos(spec.force_omega * t);
          }
          max_forcing_err = std::max(max_forcing_err, std::abs(rate - ref));
        } else if (spec.kind == SystemKind::damped_spring) {
          max_identity_err = std::max(max_identity_err, std::abs(rate + dissipation_rate(spec, x)));
        }
      }
      if (s < cfg.steps) x = step(Scheme::rk4, f, x, t, cfg.dt);
    }
  }

  auto& m = report.measurements;
  switch (spec.kind) {
    case SystemKind::simple_spring:
      report.claim = "mechanical energy conserved";
      m = {{"max_relative_drift", max_drift}, {"tolerance", cfg.drift_tol}};
      report.passed = max_drift < cfg.drift_tol;
      break;
    case SystemKind::forced_spring:
      report.claim = "dH/dt = -sum qdot k1 cos(omega t)";
      m = {{"max_rate_error", max_forcing_err},
           {"max_energy_variation", max_variation},
           {"samples", static_cast<double>(samples)},
           {"tolerance", cfg.forcing_tol}};
      report.passed = max_forcing_err < cfg.forcing_tol && max_variation > 100.0 * cfg.forcing_tol;
      break;
    case SystemKind::damped_spring:
      report.claim = "mechanical energy nonincreasing, dH/dt = -gamma sum p^2/m^2";
      m = {{"monotone_violations", static_cast<double>(violations)},
           {"max_step_increase", max_increase},
           {"max_rate_error", max_identity_err},
           {"samples", static_cast<double>(samples)},
           {"monotone_tolerance", cfg.monotone_tol},
           {"rate_tolerance", cfg.identity_tol}};
      report.passed = violations == 0 && max_identity_err < cfg.identity_tol;
      break;
    default: break;
  }
  return report;
}

nlohmann::ordered_json to_json(const EnergyReport& report) {
  return {{"system", std::string(to_string(report.system))},
          {"classification", std::string(to_string(report.classification))},
          {"claim", report.claim},
          {"passed", report.passed},
          {"measurements", measurements_json(report.measurements)}};
}

// ---------------------------------------------------------------------------

LyapunovReport lyapunov_mle(const SystemSpec& spec, const StateVector& base,
                            const LyapunovConfig& cfg) {
  spec.validate();
  if (!(cfg.sigma > 0.0)) throw ConfigError("perturbation sigma must be positive");
  if (cfg.n_trajectories < 2) throw ConfigError("at least two trajectories are required");
  if (cfg.subsample == 0 || cfg.n_points == 0) throw ConfigError("empty MLE horizon");

  const DerivativeFn f = derivative_fn(spec);
  const TimeGrid grid(0.0, cfg.dt, cfg.subsample * cfg.n_points);
  std::vector<std::vector<StateVector>> trajs(cfg.n_trajectories);
  std::vector<bool> ok(cfg.n_trajectories, true);
  for (std::size_t i = 0; i < cfg.n_trajectories; ++i) {
    Rng rng(cfg.seed, i);
    StateVector x = base;
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += cfg.sigma * rng.normal();
    try {
      trajs[i] = integrate_subsampled(f, x, grid, cfg.scheme, cfg.subsample).states;
      for (const auto& s : trajs[i]) ok[i] = ok[i] && s.all_finite();
    } catch (const IntegrationError&) {
      ok[i] = false;
    }
  }

  LyapunovReport report;
  report.system = spec.kind;
  report.sigma = cfg.sigma;
  const double dt_obs = cfg.dt * static_cast<double>(cfg.subsample);
  for (std::size_t i = 0; i < cfg.n_trajectories; ++i) {
    for (std::size_t j = i + 1; j < cfg.n_trajectories; ++j) {
      ++report.n_pairs;
      if (!ok[i] || !ok[j]) {
        ++report.n_excluded;
        continue;
      }
      const double d0 = l2(trajs[i][0], trajs[j][0]);
      double lambda = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 1; k < trajs[i].size(); ++k) {
        const double t = static_cast<double>(k) * dt_obs;
        lambda = std::max(lambda, std::log(l2(trajs[i][k], trajs[j][k]) / d0) / t);
      }
      report.values.push_back(lambda);
    }
  }
  if (!report.values.empty()) {
    const double n = static_cast<double>(report.values.size());
    for (double v : report.values) report.mean += v / n;
    double ss = 0.0;
    for (double v : report.values) ss += (v - report.mean) * (v - report.mean);
    report.std = report.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  } else {
    report.mean = report.std = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

nlohmann::ordered_json to_json(const LyapunovReport& report) {
  return {{"system", std::string(to_string(report.system))},
          {"sigma", report.sigma},
          {"n_pairs", report.n_pairs},
          {"n_excluded", report.n_excluded},
          {"mean", report.mean},
          {"std", report.std},
          {"values", report.values}};
}

std::string to_csv(const LyapunovReport& report) {
  std::ostringstream out;
  out << "system,pair,mle\n";
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    out << to_string(report.system) << ',' << i << ',' << fmt(report.values[i]) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.passed; });
}

StateVector pendulum_reference_state() {
  return StateVector(3, 1, 1, {1.5, 0.0, 1.2, 0.0, -0.9, 0.0});
}

StateVector spring_reference_state(const SystemSpec& spec, std::uint64_t seed) {
  Rng rng(seed, 0);
  return sample_initial_state(spec, InitialConditionConfig{}, rng);
}

SuiteReport run_lemma1_suite() {
  SuiteReport report;
  report.suite = "lemma1";
  const std::vector<double> dts{1e-3, 5e-4, 2.5e-4};

  SystemSpec stiff = SystemSpec::defaults(SystemKind::simple_spring, 1);
  stiff.dim = 1;
  stiff.spring_k = 2500.0;
  const auto spring = lemma1_sweep(stiff, StateVector(1, 1, 1, {1.0, 0.0}), Scheme::rk4, dts, 1.0);

  const SystemSpec pend = SystemSpec::defaults(SystemKind::triple_pendulum);
  const auto pendulum = lemma1_sweep(pend, pendulum_reference_state(), Scheme::rk4, dts, 1.0);

  SystemSpec damped_spec = SystemSpec::defaults(SystemKind::damped_spring, 1);
  damped_spec.dim = 1;
  const auto damped =
      lemma1_sweep(damped_spec, StateVector(1, 1, 1, {1.0, 0.0}), Scheme::rk4, dts, 1.0);

  auto min_ratio = [](const RoundtripSweep& s) {
    return *std::min_element(s.ratios.begin(), s.ratios.end());
  };
  const double floor = *std::min_element(damped.discrepancies.begin(), damped.discrepancies.end());
  const double spread =
      *std::max_element(damped.discrepancies.begin(), damped.discrepancies.end()) / floor;

  report.checks.push_back({"simple_spring_rk4_ratio>=12", min_ratio(spring) >= 12.0,
                           "min ratio " + fmt(min_ratio(spring))});
  report.checks.push_back({"triple_pendulum_rk4_ratio>=12", min_ratio(pendulum) >= 12.0,
                           "min ratio " + fmt(min_ratio(pendulum))});
  report.checks.push_back({"damped_spring_plateau>1e-3", floor > 1e-3 && spread < 2.0,
                           "min discrepancy " + fmt(floor) + ", max/min " + fmt(spread)});
  report.measurements = {{"simple_spring_min_ratio", min_ratio(spring)},
                         {"triple_pendulum_min_ratio", min_ratio(pendulum)},
                         {"damped_spring_min_discrepancy", floor},
                         {"damped_spring_spread", spread}};
  report.data = {{"simple_spring", to_json(spring)},
                 {"simple_spring_k", stiff.spring_k},
                 {"triple_pendulum", to_json(pendulum)},
                 {"damped_spring", to_json(damped)}};
  return report;
}

SuiteReport run_theorem1_suite() {
  SuiteReport report;
  report.suite = "theorem1";
  ScalingConfig euler_cfg;
  euler_cfg.scheme = Scheme::euler;
  ScalingConfig heun_cfg;
  heun_cfg.scheme = Scheme::heun;
  const ScalingReport euler = theorem1_scaling(euler_cfg);
  const ScalingReport heun = theorem1_scaling(heun_cfg);

  const double s_pred = euler.pred_vs_dt.slope;
  report.checks.push_back({"euler_l_pred_dt_slope=2+-0.3",
                           std::abs(s_pred - 2.0) <= 0.3 && euler.pred_vs_dt.r2 > 0.98,
                           "slope " + fmt(s_pred) + ", r2 " + fmt(euler.pred_vs_dt.r2)});
  const double gap = heun.rev_vs_dt.slope - heun.pred_vs_dt.slope;
  report.checks.push_back({"heun_rev_slope-pred_slope>=1.5",
                           gap >= 1.5 && heun.rev_vs_dt.reliable && heun.pred_vs_dt.reliable,
                           "l_reverse slope " + fmt(heun.rev_vs_dt.slope) + ", l_pred slope " +
                               fmt(heun.pred_vs_dt.slope)});
  // Two halvings: the first three step sizes.
  double growth = 0.0;
  for (std::size_t i = 1; i < 3; ++i) {
    growth = std::max(growth, heun.rev_envelope[i] / heun.rev_envelope[0]);
  }
  report.checks.push_back({"heun_l_reverse/(T^5 dt^4)_bounded", growth <= 10.0,
                           "max growth over two halvings " + fmt(growth)});
  bool nondecreasing = true;
  for (const auto* r : {&euler, &heun}) {
    for (std::size_t i = 1; i < r->T_sweep.size(); ++i) {
      nondecreasing = nondecreasing && r->T_sweep[i].l_pred >= r->T_sweep[i - 1].l_pred &&
                      r->T_sweep[i].l_reverse >= r->T_sweep[i - 1].l_reverse;
    }
  }
  const bool positive = euler.pred_vs_T.slope > 0.0 && euler.rev_vs_T.slope > 0.0 &&
                        heun.pred_vs_T.slope > 0.0 && heun.rev_vs_T.slope > 0.0;
  report.checks.push_back({"losses_grow_with_T", nondecreasing && positive,
                           "T slopes euler " + fmt(euler.pred_vs_T.slope) + "/" +
                               fmt(euler.rev_vs_T.slope) + ", heun " + fmt(heun.pred_vs_T.slope) +
                               "/" + fmt(heun.rev_vs_T.slope)});
  report.measurements = {{"euler_l_pred_dt_slope", s_pred},
                         {"euler_l_pred_dt_r2", euler.pred_vs_dt.r2},
                         {"euler_l_reverse_dt_slope", euler.rev_vs_dt.slope},
                         {"heun_l_pred_dt_slope", heun.pred_vs_dt.slope},
                         {"heun_l_reverse_dt_slope", heun.rev_vs_dt.slope},
                         {"heun_l_reverse_dt_r2", heun.rev_vs_dt.r2},
                         {"heun_envelope_growth", growth}};
  report.data = {{"euler", to_json(euler)}, {"heun", to_json(heun)}};
  return report;
}

SuiteReport run_lemma2_suite(std::uint64_t seed) {
  SuiteReport report;
  report.suite = "lemma2";
  const MaxErrorPair sample = lemma2_construction_check(0.3, 0.4);
  report.checks.push_back({"(0.3,0.4)->(0.4,0.7)",
                           std::abs(sample.treat - 0.4) < 1e-12 && std::abs(sample.rev2 - 0.7) < 1e-12,
                           "(" + fmt(sample.treat) + ", " + fmt(sample.rev2) + ")"});
  const MaxErrorPair exact = lemma2_construction_check(0.0, 0.25);
  report.checks.push_back({"a=0 -> (b,b)", exact.treat == 0.25 && exact.rev2 == 0.25,
                           "(" + fmt(exact.treat) + ", " + fmt(exact.rev2) + ")"});
  const std::size_t n = 10000;
  const std::size_t violations = lemma2_property_violations(n, seed);
  report.checks.push_back({"max(a,b)<=a+b over 10000 pairs", violations == 0,
                           std::to_string(violations) + " violations"});
  report.measurements = {{"treat_max_error", sample.treat},
                         {"rev2_max_error", sample.rev2},
                         {"property_pairs", static_cast<double>(n)},
                         {"property_violations", static_cast<double>(violations)}};
  report.data = {{"sample", {{"a", 0.3}, {"b", 0.4}, {"treat", sample.treat}, {"rev2", sample.rev2}}}};
  return report;
}

SuiteReport run_energy_suite(const std::vector<SystemKind>& only) {
  SuiteReport report;
  report.suite = "energy";
  std::vector<SystemKind> kinds = only;
  if (kinds.empty()) {
    kinds = {SystemKind::simple_spring, SystemKind::forced_spring, SystemKind::damped_spring};
  }
  const EnergyCheckConfig cfg;
  for (SystemKind kind : kinds) {
    const EnergyReport r = energy_classification_check(SystemSpec::defaults(kind, 5), cfg);
    std::string detail = r.claim;
    for (const auto& [k, v] : r.measurements) {
      detail += "; " + k + " " + fmt(v);
      report.measurements.emplace_back(std::string(to_string(kind)) + "_" + k, v);
    }
    report.checks.push_back({std::string(to_string(kind)), r.passed, detail});
    report.data[std::string(to_string(kind))] = to_json(r);
  }
  return report;
}

SuiteReport run_mle_suite(std::size_t workers) {
  SuiteReport report;
  report.suite = "mle";
  const SystemSpec pend = SystemSpec::defaults(SystemKind::triple_pendulum);
  const SystemSpec spring = SystemSpec::defaults(SystemKind::simple_spring, 5);
  LyapunovConfig pend_cfg;
  pend_cfg.scheme = Scheme::rk4;
  pend_cfg.dt = 1e-4;
  LyapunovConfig spring_cfg;
  spring_cfg.scheme = Scheme::euler;
  spring_cfg.dt = 1e-3;

  LyapunovReport results[2];
  parallel_for(2, workers, [&](std::size_t i) {
    results[i] = i == 0 ? lyapunov_mle(pend, pendulum_reference_state(), pend_cfg)
                        : lyapunov_mle(spring, spring_reference_state(spring, 7), spring_cfg);
  });
  const auto& p = results[0];
  const auto& s = results[1];
  report.checks.push_back({"mle(triple_pendulum)>10*mle(simple_spring)", p.mean > 10.0 * s.mean,
                           "pendulum " + fmt(p.mean) + " +- " + fmt(p.std) + ", spring " +
                               fmt(s.mean) + " +- " + fmt(s.std)});
  report.measurements = {{"triple_pendulum_mle_mean", p.mean},
                         {"triple_pendulum_mle_std", p.std},
                         {"simple_spring_mle_mean", s.mean},
                         {"simple_spring_mle_std", s.std}};
  report.data = {{"triple_pendulum", to_json(p)}, {"simple_spring", to_json(s)}};
  return report;
}

SuiteReport run_suite(const std::string& name, const std::vector<SystemKind>& energy_systems,
                      std::size_t workers) {
  if (name == "lemma1") return run_lemma1_suite();
  if (name == "theorem1") return run_theorem1_suite();
  if (name == "lemma2") return run_lemma2_suite();
  if (name == "energy") return run_energy_suite(energy_systems);
  if (name == "mle") return run_mle_suite(workers);
  throw ConfigError("unknown suite '" + name + "' (expected lemma1|theorem1|lemma2|energy|mle|all)");
}

nlohmann::ordered_json to_json(const SuiteReport& report) {
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return {{"suite", report.suite},
          {"passed", report.passed()},
          {"checks", std::move(checks)},
          {"measurements", measurements_json(report.measurements)},
          {"data", report.data}};
}

std::string to_csv(const std::vector<SuiteReport>& reports) {
  std::ostringstream out;
  out << "suite,name,value\n";
  for (const auto& r : reports) {
    for (const auto& c : r.checks) out << r.suite << ",\"" << c.name << "\"," << (c.passed ? 1 : 0) << '\n';
    for (const auto& [k, v] : r.measurements) out << r.suite << ',' << k << ',' << fmt(v) << '\n';
  }
  return out.str();
}

}  // namespace treat
