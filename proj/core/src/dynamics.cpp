#include "treat/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace treat {

StateVector::StateVector(std::size_t n_agents, std::size_t dq, std::size_t dp)
    : StateVector(n_agents, dq, dp, std::vector<double>(n_agents * (dq + dp), 0.0)) {}

StateVector::StateVector(std::size_t n_agents, std::size_t dq, std::size_t dp,
                         std::vector<double> values)
    : n_agents_(n_agents), dq_(dq), dp_(dp), values_(std::move(values)) {
  if (n_agents == 0) throw ConfigError("StateVector needs at least one agent");
  if (values_.size() != n_agents * (dq + dp)) {
    throw ConfigError("StateVector: expected " + std::to_string(n_agents * (dq + dp)) +
                      " values, got " + std::to_string(values_.size()));
  }
}

StateVector StateVector::from_qp(std::size_t n_agents, std::size_t dq, std::size_t dp,
                                 std::span<const double> q, std::span<const double> p) {
  if (q.size() != n_agents * dq || p.size() != n_agents * dp) {
    throw ConfigError("StateVector::from_qp: q/p lengths do not match agent count");
  }
  StateVector s(n_agents, dq, dp);
  for (std::size_t i = 0; i < n_agents; ++i) {
    std::copy_n(q.begin() + static_cast<std::ptrdiff_t>(i * dq), dq, s.q(i).begin());
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(i * dp), dp, s.p(i).begin());
  }
  return s;
}

std::span<double> StateVector::agent(std::size_t i) {
  return std::span<double>(values_).subspan(i * agent_width(), agent_width());
}
std::span<const double> StateVector::agent(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * agent_width(), agent_width());
}
std::span<double> StateVector::q(std::size_t i) { return agent(i).first(dq_); }
std::span<const double> StateVector::q(std::size_t i) const { return agent(i).first(dq_); }
std::span<double> StateVector::p(std::size_t i) { return agent(i).subspan(dq_, dp_); }
std::span<const double> StateVector::p(std::size_t i) const {
  return agent(i).subspan(dq_, dp_);
}

bool StateVector::same_layout(const StateVector& other) const noexcept {
  return n_agents_ == other.n_agents_ && dq_ == other.dq_ && dp_ == other.dp_;
}

bool StateVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string StateVector::component_name(std::size_t k) const {
  const std::size_t w = agent_width();
  if (w == 0) return "component " + std::to_string(k);
  const std::size_t agent_index = k / w;
  const std::size_t offset = k % w;
  if (offset < dq_) {
    return "agent " + std::to_string(agent_index) + " q[" + std::to_string(offset) + "]";
  }
  return "agent " + std::to_string(agent_index) + " p[" + std::to_string(offset - dq_) + "]";
}

StateVector& StateVector::operator+=(const StateVector& other) {
  if (!same_layout(other)) throw ConfigError("StateVector +: layout mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& other) {
  if (!same_layout(other)) throw ConfigError("StateVector -: layout mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

StateVector& StateVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

double max_abs_diff(const StateVector& a, const StateVector& b) {
  if (!a.same_layout(b)) throw ConfigError("max_abs_diff: layout mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

StateVector reverse_state(const StateVector& state) {
  StateVector out = state;
  for (std::size_t i = 0; i < out.n_agents(); ++i) {
    for (double& v : out.p(i)) v = -v;
  }
  return out;
}

TimeGrid::TimeGrid(double t0, double dt, std::size_t n_steps)
    : t0_(t0), dt_(dt), n_steps_(n_steps) {
  if (!std::isfinite(t0)) throw ConfigError("TimeGrid: t0 must be finite");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("TimeGrid: dt must be positive");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(n_points());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
  return out;
}

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::euler: return "euler";
    case Scheme::heun: return "heun";
    case Scheme::rk4: return "rk4";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "euler") return Scheme::euler;
  if (name == "heun") return Scheme::heun;
  if (name == "rk4") return Scheme::rk4;
  throw ConfigError("unknown scheme '" + std::string(name) + "' (expected euler|heun|rk4)");
}

void ensure_finite_derivative(const StateVector& derivative) {
  const auto values = derivative.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw IntegrationError("non-finite derivative in " + derivative.component_name(k));
    }
  }
}

StateTrajectory integrate_subsampled(const DerivativeFn& deriv, const StateVector& state0,
                                     const TimeGrid& grid, Scheme scheme,
                                     std::size_t keep_every) {
  if (keep_every == 0) throw ConfigError("integrate: keep_every must be >= 1");
  StateTrajectory out;
  const std::size_t kept = grid.n_steps() / keep_every + 1;
  out.times.reserve(kept);
  out.states.reserve(kept);
  out.times.push_back(grid.time(0));
  out.states.push_back(state0);

  StateVector state = state0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    try {
      state = step(scheme, deriv, state, grid.time(k), grid.dt());
    } catch (const IntegrationError& e) {
      throw e.at_step(k);
    }
    if (!state.all_finite()) {
      throw IntegrationError("state became non-finite", k);
    }
    if ((k + 1) % keep_every == 0) {
      out.times.push_back(grid.time(k + 1));
      out.states.push_back(state);
    }
  }
  return out;
}

StateTrajectory integrate(const DerivativeFn& deriv, const StateVector& state0,
                          const TimeGrid& grid, Scheme scheme) {
  return integrate_subsampled(deriv, state0, grid, scheme, 1);
}

}  // namespace treat
