#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treat/dynamics.hpp"

namespace treat {

enum class SystemKind { simple_spring, forced_spring, damped_spring, triple_pendulum, attractor };

std::string_view to_string(SystemKind kind);
SystemKind parse_system_kind(std::string_view name);

/// Undirected coupling graph between agents. Symmetric, no self-loops.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  explicit InteractionGraph(std::size_t n);

  static InteractionGraph complete(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] bool connected(std::size_t i, std::size_t j) const;
  void connect(std::size_t i, std::size_t j);
  [[nodiscard]] std::size_t edge_count() const;
  [[nodiscard]] std::vector<std::size_t> neighbors(std::size_t i) const;
  /// Flattened row-major adjacency (0/1), n*n entries.
  [[nodiscard]] const std::vector<std::uint8_t>& adjacency() const noexcept { return adj_; }

  /// Throws ConfigError if the matrix is asymmetric or has self-loops.
  static InteractionGraph from_adjacency(std::size_t n, std::vector<std::uint8_t> adjacency);

  friend bool operator==(const InteractionGraph&, const InteractionGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
};

/// Physical system plus parameters. Fields irrelevant to `kind` are kept but
/// ignored.
///
/// Spring kinds come in two topologies: `anchored` (each mass tied to the
/// origin, dp_i/dt = -k q_i, used for single-body datasets) and pairwise
/// (dp_i/dt = -sum_{j in N_i} k (q_i - q_j)). The damped kind adds -gamma p_i/m
/// in both; the forced kind adds -k1 cos(omega t) to every coordinate.
struct SystemSpec {
  SystemKind kind = SystemKind::simple_spring;
  std::size_t n_agents = 1;
  std::size_t dim = 2;        // spatial dimension for spring kinds
  double mass = 1.0;
  double spring_k = 0.1;
  double friction = 10.0;     // gamma
  double force_k1 = 10.0;
  double force_omega = 1.0;
  double stick_length = 1.0;
  double gravity = 9.8;
  bool anchored = true;
  InteractionGraph coupling{1};

  /// Defaults for `kind`: m=1, k=0.1, gamma=10, k1=10, omega=1; pendulum
  /// forces 3 agents, attractor 1 agent with a 3-d state. Springs with one
  /// agent are anchored; with several they are pairwise on a complete graph.
  static SystemSpec defaults(SystemKind kind, std::size_t n_agents = 1);

  void validate() const;

  [[nodiscard]] std::size_t dq() const;
  [[nodiscard]] std::size_t dp() const;
  [[nodiscard]] StateVector zero_state() const;
  [[nodiscard]] bool is_spring() const noexcept;
};

nlohmann::ordered_json to_json(const SystemSpec& spec);
SystemSpec system_spec_from_json(const nlohmann::json& j);

/// Time derivative (dq/dt, dp/dt) for the system's equations of motion.
StateVector eval_derivative(const SystemSpec& spec, const StateVector& state, double t);

/// Convenience wrapper binding `spec` into a DerivativeFn.
DerivativeFn derivative_fn(const SystemSpec& spec);

/// Hamiltonian split into the mechanical part (kinetic + spring potential)
/// and the explicitly time-dependent part.
struct Energy {
  double kinetic = 0.0;
  double potential = 0.0;
  /// Forced: sum_i q_i k1 cos(omega t). Damped: the caller-supplied
  /// accumulated dissipation (gamma/m) * integral of p^2/m dt. Zero otherwise.
  double time_dependent = 0.0;

  [[nodiscard]] double mechanical() const noexcept { return kinetic + potential; }
  [[nodiscard]] double total() const noexcept { return kinetic + potential + time_dependent; }
};

/// Spring kinds only; other kinds throw UnsupportedSystemError.
Energy hamiltonian(const SystemSpec& spec, const StateVector& state, double t,
                   double accumulated_dissipation = 0.0);

/// Rate at which friction removes mechanical energy, gamma * sum p^2 / m^2.
double dissipation_rate(const SystemSpec& spec, const StateVector& state);

/// Triple-pendulum kinetic energy matrix: p = M(theta) thetadot.
std::array<std::array<double, 3>, 3> pendulum_mass_matrix(const SystemSpec& spec,
                                                          const StateVector& state);

/// Angular velocities thetadot = M^{-1} p by direct linear solve.
std::array<double, 3> pendulum_angular_velocity(const SystemSpec& spec, const StateVector& state);

/// Total mechanical energy T + V of the triple pendulum.
double pendulum_energy(const SystemSpec& spec, const StateVector& state);

enum class Reversibility {
  conservative_reversible,
  nonconservative_reversible,
  nonconservative_irreversible,
  unknown,
};

std::string_view to_string(Reversibility r);
Reversibility classify_reversibility(const SystemSpec& spec);

/// Exact solution of dq/dt = p/m, dp/dt = -k q.
std::pair<double, double> analytic_solution_simple_spring_1d(double q0, double p0, double k,
                                                             double m, double t);

}  // namespace treat
