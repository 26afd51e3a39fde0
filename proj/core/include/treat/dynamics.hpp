#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treat/error.hpp"

namespace treat {

/// Per-agent generalized positions and momenta stored as one flat array,
/// agent-major with q before p: [q_0, p_0, q_1, p_1, ...].
///
/// dp may be zero for systems with no momentum split (the strange attractor).
class StateVector {
 public:
  StateVector() = default;
  StateVector(std::size_t n_agents, std::size_t dq, std::size_t dp);
  StateVector(std::size_t n_agents, std::size_t dq, std::size_t dp, std::vector<double> values);

  /// Assemble from separate q (n_agents*dq) and p (n_agents*dp) arrays.
  static StateVector from_qp(std::size_t n_agents, std::size_t dq, std::size_t dp,
                             std::span<const double> q, std::span<const double> p);

  [[nodiscard]] std::size_t n_agents() const noexcept { return n_agents_; }
  [[nodiscard]] std::size_t dq() const noexcept { return dq_; }
  [[nodiscard]] std::size_t dp() const noexcept { return dp_; }
  [[nodiscard]] std::size_t agent_width() const noexcept { return dq_ + dp_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

  [[nodiscard]] std::span<double> agent(std::size_t i);
  [[nodiscard]] std::span<const double> agent(std::size_t i) const;
  [[nodiscard]] std::span<double> q(std::size_t i);
  [[nodiscard]] std::span<const double> q(std::size_t i) const;
  [[nodiscard]] std::span<double> p(std::size_t i);
  [[nodiscard]] std::span<const double> p(std::size_t i) const;

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  [[nodiscard]] bool same_layout(const StateVector& other) const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;
  /// Human-readable name of flat component k, e.g. "agent 1 p[0]".
  [[nodiscard]] std::string component_name(std::size_t k) const;

  StateVector& operator+=(const StateVector& other);
  StateVector& operator-=(const StateVector& other);
  StateVector& operator*=(double s);

  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
  friend StateVector operator*(double s, StateVector a) { return a *= s; }
  friend StateVector operator*(StateVector a, double s) { return a *= s; }
  friend StateVector operator-(StateVector a) { return a *= -1.0; }

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  std::size_t n_agents_ = 0;
  std::size_t dq_ = 0;
  std::size_t dp_ = 0;
  std::vector<double> values_;
};

/// Max-abs distance between two states of the same layout.
double max_abs_diff(const StateVector& a, const StateVector& b);

/// Time-reversal operator R: (q, p) -> (q, -p). An involution.
StateVector reverse_state(const StateVector& state);

/// Uniform grid t_k = t0 + k*dt for k = 0..n_steps, spanning T = n_steps*dt.
///
/// Reverse timestamps satisfy t'_{K-k} = T - t_k, which makes t'_0 and t_K
/// refer to the same physical instant.
class TimeGrid {
 public:
  TimeGrid(double t0, double dt, std::size_t n_steps);

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
  [[nodiscard]] std::size_t n_points() const noexcept { return n_steps_ + 1; }
  [[nodiscard]] double span() const noexcept { return static_cast<double>(n_steps_) * dt_; }

  [[nodiscard]] double time(std::size_t k) const noexcept {
    return t0_ + static_cast<double>(k) * dt_;
  }
  /// t'_k, the k-th timestamp of the reverse trajectory.
  [[nodiscard]] double reverse_time(std::size_t k) const noexcept {
    return span() - time(n_steps_ - k);
  }
  [[nodiscard]] std::vector<double> times() const;

 private:
  double t0_;
  double dt_;
  std::size_t n_steps_;
};

enum class Scheme { euler, heun, rk4 };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

/// Derivative callback for physical states.
using DerivativeFn = std::function<StateVector(const StateVector&, double)>;

/// Throws IntegrationError naming the first non-finite component.
void ensure_finite_derivative(const StateVector& derivative);

/// Generic fallback: states without component-level diagnostics (for example
/// autodiff variables) are checked by their caller after each step.
template <class State>
void ensure_finite_derivative(const State&) {}

// The step functions are generic over any State supporting `State + State` and
// `double * State`: physics states and autodiff variables alike.

template <class State, class Deriv>
State euler_step(Deriv&& deriv, const State& state, double t, double dt) {
  State k1 = deriv(state, t);
  ensure_finite_derivative(k1);
  return state + dt * k1;
}

/// Heun's method (explicit trapezoid). Position update expands to
/// q + (p/m) dt + (pdot/2m) dt^2 for Hamiltonian systems.
template <class State, class Deriv>
State heun_step(Deriv&& deriv, const State& state, double t, double dt) {
  State k1 = deriv(state, t);
  ensure_finite_derivative(k1);
  State k2 = deriv(state + dt * k1, t + dt);
  ensure_finite_derivative(k2);
  return state + (0.5 * dt) * (k1 + k2);
}

/// Classical four-stage Runge-Kutta with weights (1, 2, 2, 1)/6.
template <class State, class Deriv>
State rk4_step(Deriv&& deriv, const State& state, double t, double dt) {
  const double half = 0.5 * dt;
  State k1 = deriv(state, t);
  ensure_finite_derivative(k1);
  State k2 = deriv(state + half * k1, t + half);
  ensure_finite_derivative(k2);
  State k3 = deriv(state + half * k2, t + half);
  ensure_finite_derivative(k3);
  State k4 = deriv(state + dt * k3, t + dt);
  ensure_finite_derivative(k4);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class State, class Deriv>
State step(Scheme scheme, Deriv&& deriv, const State& state, double t, double dt) {
  switch (scheme) {
    case Scheme::euler: return euler_step(deriv, state, t, dt);
    case Scheme::heun: return heun_step(deriv, state, t, dt);
    case Scheme::rk4: return rk4_step(deriv, state, t, dt);
  }
  throw ConfigError("unknown integration scheme");
}

/// Advance `state` by `substeps` equal steps covering [t, t + dt].
template <class State, class Deriv>
State step_interval(Scheme scheme, Deriv&& deriv, State state, double t, double dt,
                    std::size_t substeps) {
  const double h = dt / static_cast<double>(substeps);
  for (std::size_t s = 0; s < substeps; ++s) {
    state = step(scheme, deriv, state, t + static_cast<double>(s) * h, h);
  }
  return state;
}

/// Timestamps plus states, one state per timestamp.
struct StateTrajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
};

/// Integrate over every grid step and return all n_steps + 1 states, the
/// first being `state0`. IntegrationErrors are re-thrown with the step index.
StateTrajectory integrate(const DerivativeFn& deriv, const StateVector& state0,
                          const TimeGrid& grid, Scheme scheme);

/// As `integrate` but keeps only every `keep_every`-th state (plus the first).
StateTrajectory integrate_subsampled(const DerivativeFn& deriv, const StateVector& state0,
                                     const TimeGrid& grid, Scheme scheme,
                                     std::size_t keep_every);

}  // namespace treat
