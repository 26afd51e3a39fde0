#include "treat/physics.hpp"

#include <cmath>
#include <string>

namespace treat {

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::simple_spring: return "simple_spring";
    case SystemKind::forced_spring: return "forced_spring";
    case SystemKind::damped_spring: return "damped_spring";
    case SystemKind::triple_pendulum: return "triple_pendulum";
    case SystemKind::attractor: return "attractor";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "simple_spring") return SystemKind::simple_spring;
  if (name == "forced_spring") return SystemKind::forced_spring;
  if (name == "damped_spring") return SystemKind::damped_spring;
  if (name == "triple_pendulum" || name == "pendulum") return SystemKind::triple_pendulum;
  if (name == "attractor") return SystemKind::attractor;
  throw ConfigError("unknown system '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// InteractionGraph

InteractionGraph::InteractionGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

InteractionGraph InteractionGraph::complete(std::size_t n) {
  InteractionGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) g.connect(i, j);
  }
  return g;
}

bool InteractionGraph::connected(std::size_t i, std::size_t j) const {
  return adj_.at(i * n_ + j) != 0;
}

void InteractionGraph::connect(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw ConfigError("InteractionGraph::connect: index out of range");
  if (i == j) throw ConfigError("InteractionGraph: self-loops are not allowed");
  adj_[i * n_ + j] = 1;
  adj_[j * n_ + i] = 1;
}

std::size_t InteractionGraph::edge_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) count += connected(i, j) ? 1 : 0;
  }
  return count;
}

std::vector<std::size_t> InteractionGraph::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n_; ++j) {
    if (connected(i, j)) out.push_back(j);
  }
  return out;
}

InteractionGraph InteractionGraph::from_adjacency(std::size_t n,
                                                  std::vector<std::uint8_t> adjacency) {
  if (adjacency.size() != n * n) throw ConfigError("adjacency must have n*n entries");
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i * n + i] != 0) throw ConfigError("adjacency has a self-loop");
    for (std::size_t j = 0; j < n; ++j) {
      if ((adjacency[i * n + j] != 0) != (adjacency[j * n + i] != 0)) {
        throw ConfigError("adjacency is not symmetric");
      }
    }
  }
  InteractionGraph g(n);
  for (std::size_t k = 0; k < adjacency.size(); ++k) g.adj_[k] = adjacency[k] != 0 ? 1 : 0;
  return g;
}

// ---------------------------------------------------------------------------
// SystemSpec

SystemSpec SystemSpec::defaults(SystemKind kind, std::size_t n_agents) {
  SystemSpec spec;
  spec.kind = kind;
  switch (kind) {
    case SystemKind::triple_pendulum:
      spec.n_agents = 3;
      spec.dim = 1;
      spec.anchored = false;
      break;
    case SystemKind::attractor:
      spec.n_agents = 1;
      spec.dim = 3;
      spec.anchored = false;
      break;
    default:
      spec.n_agents = n_agents;
      spec.anchored = n_agents == 1;
      break;
  }
  spec.coupling = spec.anchored || !spec.is_spring() ? InteractionGraph(spec.n_agents)
                                                      : InteractionGraph::complete(spec.n_agents);
  return spec;
}

bool SystemSpec::is_spring() const noexcept {
  return kind == SystemKind::simple_spring || kind == SystemKind::forced_spring ||
         kind == SystemKind::damped_spring;
}

void SystemSpec::validate() const {
  if (n_agents == 0) throw ConfigError("system needs at least one agent");
  if (coupling.size() != n_agents) {
    throw ConfigError("coupling graph size " + std::to_string(coupling.size()) +
                      " does not match n_agents " + std::to_string(n_agents));
  }
  switch (kind) {
    case SystemKind::triple_pendulum:
      if (n_agents != 3) throw ConfigError("triple_pendulum requires exactly 3 agents");
      if (!(mass > 0.0)) throw ConfigError("mass must be positive");
      if (!(stick_length > 0.0)) throw ConfigError("stick_length must be positive");
      if (!(gravity > 0.0)) throw ConfigError("gravity must be positive");
      break;
    case SystemKind::attractor:
      if (n_agents != 1) throw ConfigError("attractor has a single 3-dimensional state");
      break;
    default:
      if (dim == 0) throw ConfigError("spring dim must be >= 1");
      if (!(mass > 0.0)) throw ConfigError("mass must be positive");
      if (!(spring_k >= 0.0)) throw ConfigError("spring_k must be >= 0");
      if (kind == SystemKind::damped_spring && !(friction >= 0.0)) {
        throw ConfigError("friction must be >= 0");
      }
      break;
  }
}

std::size_t SystemSpec::dq() const {
  switch (kind) {
    case SystemKind::triple_pendulum: return 1;
    case SystemKind::attractor: return 3;
    default: return dim;
  }
}

std::size_t SystemSpec::dp() const {
  switch (kind) {
    case SystemKind::triple_pendulum: return 1;
    case SystemKind::attractor: return 0;
    default: return dim;
  }
}

StateVector SystemSpec::zero_state() const { return StateVector(n_agents, dq(), dp()); }

nlohmann::ordered_json to_json(const SystemSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["n_agents"] = spec.n_agents;
  j["dim"] = spec.dim;
  j["mass"] = spec.mass;
  j["spring_k"] = spec.spring_k;
  j["friction"] = spec.friction;
  j["force_k1"] = spec.force_k1;
  j["force_omega"] = spec.force_omega;
  j["stick_length"] = spec.stick_length;
  j["gravity"] = spec.gravity;
  j["anchored"] = spec.anchored;
  auto edges = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < spec.coupling.size(); ++i) {
    for (std::size_t k : spec.coupling.neighbors(i)) {
      if (k > i) edges.push_back({i, k});
    }
  }
  j["edges"] = std::move(edges);
  return j;
}

SystemSpec system_spec_from_json(const nlohmann::json& j) {
  static const char* const kKnown[] = {"kind",        "n_agents",     "dim",     "mass",
                                       "spring_k",    "friction",     "force_k1", "force_omega",
                                       "stick_length", "gravity",     "anchored", "edges"};
  if (!j.is_object()) throw ConfigError("system params must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown system field '" + item.key() + "'");
  }
  try {
    const SystemKind kind = parse_system_kind(j.at("kind").get<std::string>());
    SystemSpec spec = SystemSpec::defaults(kind, j.value("n_agents", std::size_t{1}));
    spec.dim = j.value("dim", spec.dim);
    spec.mass = j.value("mass", spec.mass);
    spec.spring_k = j.value("spring_k", spec.spring_k);
    spec.friction = j.value("friction", spec.friction);
    spec.force_k1 = j.value("force_k1", spec.force_k1);
    spec.force_omega = j.value("force_omega", spec.force_omega);
    spec.stick_length = j.value("stick_length", spec.stick_length);
    spec.gravity = j.value("gravity", spec.gravity);
    spec.anchored = j.value("anchored", spec.anchored);
    if (j.contains("edges")) {
      InteractionGraph g(spec.n_agents);
      for (const auto& e : j.at("edges")) {
        g.connect(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      }
      spec.coupling = std::move(g);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed system params: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Equations of motion

namespace {

void check_layout(const SystemSpec& spec, const StateVector& state) {
  if (state.n_agents() != spec.n_agents || state.dq() != spec.dq() || state.dp() != spec.dp()) {
    throw ConfigError("state layout (" + std::to_string(state.n_agents()) + " agents, dq=" +
                      std::to_string(state.dq()) + ", dp=" + std::to_string(state.dp()) +
                      ") does not match system '" + std::string(to_string(spec.kind)) + "'");
  }
}

// Spring restoring force on agent i, coordinate c.
double spring_force(const SystemSpec& spec, const StateVector& s, std::size_t i, std::size_t c) {
  if (spec.anchored) return -spec.spring_k * s.q(i)[c];
  double f = 0.0;
  for (std::size_t j = 0; j < spec.n_agents; ++j) {
    if (spec.coupling.connected(i, j)) f -= spec.spring_k * (s.q(i)[c] - s.q(j)[c]);
  }
  return f;
}

struct PendulumTerms {
  std::array<double, 3> theta_dot;
  std::array<double, 3> p_dot;
};

// Closed-form triple-pendulum equations for uniform sticks (mass m, length l)
// hinged end to end, state (theta_i, p_i) with p = dL/dthetadot.
PendulumTerms pendulum_terms(const SystemSpec& spec, const StateVector& s) {
  const double m = spec.mass;
  const double l = spec.stick_length;
  const double g = spec.gravity;
  const double t1 = s.q(0)[0], t2 = s.q(1)[0], t3 = s.q(2)[0];
  const double p1 = s.p(0)[0], p2 = s.p(1)[0], p3 = s.p(2)[0];
  using std::cos;
  using std::sin;

  const double core = 81.0 * cos(2.0 * (t1 - t2)) - 9.0 * cos(2.0 * (t1 - t3)) +
                      45.0 * cos(2.0 * (t2 - t3)) - 169.0;
  if (std::abs(core) < 1e-12) {
    throw SingularityError("triple pendulum denominator vanished (|D| < 1e-12)");
  }
  const double denom = m * l * l * core;

  PendulumTerms out{};
  out.theta_dot[0] = 6.0 *
                     (9.0 * p1 * cos(2.0 * (t2 - t3)) + 27.0 * p2 * cos(t1 - t2) -
                      9.0 * p2 * cos(t1 + t2 - 2.0 * t3) + 21.0 * p3 * cos(t1 - t3) -
                      27.0 * p3 * cos(t1 - 2.0 * t2 + t3) - 23.0 * p1) /
                     denom;
  out.theta_dot[1] = 6.0 *
                     (27.0 * p1 * cos(t1 - t2) - 9.0 * p1 * cos(t1 + t2 - 2.0 * t3) +
                      9.0 * p2 * cos(2.0 * (t1 - t3)) - 27.0 * p3 * cos(2.0 * t1 - t2 - t3) +
                      57.0 * p3 * cos(t2 - t3) - 47.0 * p2) /
                     denom;
  out.theta_dot[2] = 6.0 *
                     (21.0 * p1 * cos(t1 - t3) - 27.0 * p1 * cos(t1 - 2.0 * t2 + t3) -
                      27.0 * p2 * cos(2.0 * t1 - t2 - t3) + 57.0 * p2 * cos(t2 - t3) +
                      81.0 * p3 * cos(2.0 * (t1 - t2)) - 143.0 * p3) /
                     denom;

  const double w1 = out.theta_dot[0], w2 = out.theta_dot[1], w3 = out.theta_dot[2];
  out.p_dot[0] = -0.5 * m * l *
                 (3.0 * w2 * w1 * l * sin(t1 - t2) + w1 * w3 * l * sin(t1 - t3) +
                  5.0 * g * sin(t1));
  out.p_dot[1] = -0.5 * m * l *
                 (-3.0 * w1 * w2 * l * sin(t1 - t2) + w2 * w3 * l * sin(t2 - t3) +
                  3.0 * g * sin(t2));
  // dL/dtheta_3; the velocity-coupling terms enter with a positive sign.
  out.p_dot[2] = 0.5 * m * l *
                 (w1 * w3 * l * sin(t1 - t3) + w2 * w3 * l * sin(t2 - t3) - g * sin(t3));
  return out;
}

}  // namespace

StateVector eval_derivative(const SystemSpec& spec, const StateVector& state, double t) {
  check_layout(spec, state);
  StateVector d(state.n_agents(), state.dq(), state.dp());

  switch (spec.kind) {
    case SystemKind::simple_spring:
    case SystemKind::forced_spring:
    case SystemKind::damped_spring: {
      const double forcing = spec.kind == SystemKind::forced_spring
                                 ? spec.force_k1 * std::cos(spec.force_omega * t)
                                 : 0.0;
      const double damping = spec.kind == SystemKind::damped_spring ? spec.friction : 0.0;
      for (std::size_t i = 0; i < spec.n_agents; ++i) {
        for (std::size_t c = 0; c < spec.dim; ++c) {
          const double p = state.p(i)[c];
          d.q(i)[c] = p / spec.mass;
          d.p(i)[c] = spring_force(spec, state, i, c) - damping * p / spec.mass - forcing;
        }
      }
      break;
    }
    case SystemKind::triple_pendulum: {
      const PendulumTerms terms = pendulum_terms(spec, state);
      for (std::size_t i = 0; i < 3; ++i) {
        d.q(i)[0] = terms.theta_dot[i];
        d.p(i)[0] = terms.p_dot[i];
      }
      break;
    }
    case SystemKind::attractor: {
      const double x = state[0], y = state[1], z = state[2];
      d[0] = 1.0 + y * z;
      d[1] = -x * z;
      d[2] = y * y + 2.0 * y * z;
      break;
    }
  }
  return d;
}

DerivativeFn derivative_fn(const SystemSpec& spec) {
  return [spec](const StateVector& s, double t) { return eval_derivative(spec, s, t); };
}

Energy hamiltonian(const SystemSpec& spec, const StateVector& state, double t,
                   double accumulated_dissipation) {
  if (!spec.is_spring()) {
    throw UnsupportedSystemError("hamiltonian is defined for spring systems only, got '" +
                                 std::string(to_string(spec.kind)) + "'");
  }
  check_layout(spec, state);
  Energy e;
  for (std::size_t i = 0; i < spec.n_agents; ++i) {
    for (double p : state.p(i)) e.kinetic += p * p / (2.0 * spec.mass);
  }
  for (std::size_t i = 0; i < spec.n_agents; ++i) {
    for (std::size_t c = 0; c < spec.dim; ++c) {
      if (spec.anchored) {
        e.potential += 0.5 * spec.spring_k * state.q(i)[c] * state.q(i)[c];
        continue;
      }
      // 1/2 sum_i sum_{j in N_i} 1/2 k (q_i - q_j)^2 counts each edge twice.
      for (std::size_t j = 0; j < spec.n_agents; ++j) {
        if (!spec.coupling.connected(i, j)) continue;
        const double diff = state.q(i)[c] - state.q(j)[c];
        e.potential += 0.25 * spec.spring_k * diff * diff;
      }
    }
  }
  if (spec.kind == SystemKind::forced_spring) {
    double sum_q = 0.0;
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      for (double q : state.q(i)) sum_q += q;
    }
    e.time_dependent = sum_q * spec.force_k1 * std::cos(spec.force_omega * t);
  } else if (spec.kind == SystemKind::damped_spring) {
    e.time_dependent = accumulated_dissipation;
  }
  return e;
}

double dissipation_rate(const SystemSpec& spec, const StateVector& state) {
  if (spec.kind != SystemKind::damped_spring) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < spec.n_agents; ++i) {
    for (double p : state.p(i)) sum += p * p;
  }
  return spec.friction * sum / (spec.mass * spec.mass);
}

std::array<std::array<double, 3>, 3> pendulum_mass_matrix(const SystemSpec& spec,
                                                          const StateVector& state) {
  if (spec.kind != SystemKind::triple_pendulum) {
    throw UnsupportedSystemError("pendulum_mass_matrix requires triple_pendulum");
  }
  check_layout(spec, state);
  const double t1 = state.q(0)[0], t2 = state.q(1)[0], t3 = state.q(2)[0];
  const double c12 = std::cos(t1 - t2), c13 = std::cos(t1 - t3), c23 = std::cos(t2 - t3);
  const double s = spec.mass * spec.stick_length * spec.stick_length / 6.0;
  return {{{14.0 * s, 9.0 * c12 * s, 3.0 * c13 * s},
           {9.0 * c12 * s, 8.0 * s, 3.0 * c23 * s},
           {3.0 * c13 * s, 3.0 * c23 * s, 2.0 * s}}};
}

std::array<double, 3> pendulum_angular_velocity(const SystemSpec& spec, const StateVector& state) {
  const auto m = pendulum_mass_matrix(spec, state);
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  const double scale = m[0][0] * m[1][1] * m[2][2];
  if (!(std::abs(det) > 1e-12 * std::abs(scale))) {
    throw SingularityError("triple pendulum mass matrix is singular");
  }
  const std::array<double, 3> p{state.p(0)[0], state.p(1)[0], state.p(2)[0]};
  // Cramer's rule, column k replaced by p.
  std::array<double, 3> w{};
  for (int k = 0; k < 3; ++k) {
    auto a = m;
    for (int r = 0; r < 3; ++r) a[r][k] = p[r];
    const double dk = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                      a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                      a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    w[k] = dk / det;
  }
  return w;
}

double pendulum_energy(const SystemSpec& spec, const StateVector& state) {
  const auto w = pendulum_angular_velocity(spec, state);
  double kinetic = 0.0;
  for (std::size_t i = 0; i < 3; ++i) kinetic += 0.5 * state.p(i)[0] * w[i];
  const double t1 = state.q(0)[0], t2 = state.q(1)[0], t3 = state.q(2)[0];
  // Centroid heights y1 = -l/2 c1, y2 = -l(c1 + c2/2), y3 = -l(c1 + c2 + c3/2).
  const double potential = -spec.mass * spec.gravity * spec.stick_length *
                           (2.5 * std::cos(t1) + 1.5 * std::cos(t2) + 0.5 * std::cos(t3));
  return kinetic + potential;
}

std::string_view to_string(Reversibility r) {
  switch (r) {
    case Reversibility::conservative_reversible: return "conservative_reversible";
    case Reversibility::nonconservative_reversible: return "nonconservative_reversible";
    case Reversibility::nonconservative_irreversible: return "nonconservative_irreversible";
    case Reversibility::unknown: return "unknown";
  }
  return "unknown";
}

Reversibility classify_reversibility(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemKind::simple_spring:
    case SystemKind::triple_pendulum:
      return Reversibility::conservative_reversible;
    case SystemKind::forced_spring:
    case SystemKind::attractor:
      return Reversibility::nonconservative_reversible;
    case SystemKind::damped_spring:
      return Reversibility::nonconservative_irreversible;
  }
  return Reversibility::unknown;
}

std::pair<double, double> analytic_solution_simple_spring_1d(double q0, double p0, double k,
                                                             double m, double t) {
  const double omega = std::sqrt(k / m);
  const double c = std::cos(omega * t);
  const double s = std::sin(omega * t);
  const double q = q0 * c + p0 / (m * omega) * s;
  const double p = m * (-q0 * omega * s + p0 / m * c);
  return {q, p};
}

}  // namespace treat
