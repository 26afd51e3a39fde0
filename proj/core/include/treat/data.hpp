#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treat/dynamics.hpp"
#include "treat/physics.hpp"
#include "treat/rng.hpp"

namespace treat {

inline constexpr int kDatasetSchemaVersion = 1;

/// Each pair (i, j), i < j, is connected independently with probability
/// `edge_prob`, drawn from Rng(seed).
InteractionGraph sample_graph(std::size_t n, double edge_prob, std::uint64_t seed);

/// Simulated trajectory in raw system units. `scale` is the dataset-wide
/// normalization divisor (1 until a dataset has been normalized).
struct Trajectory {
  SystemSpec system;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> times;
  std::vector<StateVector> states;
  double scale = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  /// Throws DatasetError on length mismatch or non-increasing timestamps.
  void validate() const;
  [[nodiscard]] StateVector normalized_state(std::size_t k) const;
};

/// The scheme the benchmark datasets were generated with: Euler for springs,
/// RK4 for the pendulum and the attractor.
Scheme default_scheme(SystemKind kind);

Trajectory generate_trajectory(const SystemSpec& spec, const StateVector& initial_state,
                               Scheme scheme, double dt, std::size_t raw_steps,
                               std::size_t subsample_every);

struct InitialConditionConfig {
  double spring_scale = 1.0;      // q, p ~ N(0, 1) * spring_scale
  double pendulum_angle = 0.5;    // theta ~ U[-a, a], p_theta = 0
  double attractor_z_min = 1.0;   // z ~ U[min, max], x = y = 0
  double attractor_z_max = 3.0;
};

StateVector sample_initial_state(const SystemSpec& spec, const InitialConditionConfig& cfg,
                                 Rng& rng);

/// i.i.d. N(0, sigma^2) added to every state component. sigma = 0 returns
/// the input unchanged.
Trajectory add_gaussian_noise(const Trajectory& traj, double sigma, std::uint64_t seed,
                              std::uint64_t stream = 0);

/// Sorted, distinct observation indices per agent inside [begin, end).
using AgentIndexSets = std::vector<std::vector<std::size_t>>;

/// For each agent independently: n ~ U{n_obs_min..n_obs_max}, then n distinct
/// point indices drawn uniformly from [begin, end).
AgentIndexSets irregular_subsample(std::size_t n_agents, std::size_t begin, std::size_t end,
                                   std::size_t n_obs_min, std::size_t n_obs_max, Rng& rng);

/// Encoder input plus regular prediction targets, in normalized units.
struct ObservationSet {
  struct Agent {
    std::vector<double> times;
    std::vector<std::vector<double>> features;
  };
  std::vector<Agent> condition;
  std::vector<double> target_times;
  /// One flat (agent-major) feature vector per target time.
  std::vector<std::vector<double>> targets;
  InteractionGraph graph;
  std::size_t n_agents = 0;
  std::size_t feature_dim = 0;

  [[nodiscard]] double t0() const { return target_times.at(0); }
  [[nodiscard]] std::size_t n_targets() const noexcept { return target_times.size(); }
};

/// Stored description of how a trajectory is split into condition and
/// prediction windows.
struct ObservationPlan {
  AgentIndexSets condition;        // indices into Trajectory::times
  std::size_t target_begin = 0;    // first target point index
  std::size_t target_end = 0;      // one past the last target point index
};

/// Build normalized encoder inputs and targets. `max_targets` truncates the
/// prediction window (0 keeps all).
ObservationSet make_observation_set(const Trajectory& traj, const ObservationPlan& plan,
                                    std::size_t max_targets = 0);

/// Dataset-generation parameters. Each record i draws its initial condition
/// from Rng(seed, 2i) and its observation plan from Rng(seed, 2i + 1).
struct DatasetConfig {
  SystemSpec system = SystemSpec::defaults(SystemKind::simple_spring, 1);
  std::size_t n_train = 200;
  std::size_t n_test = 0;
  Scheme scheme = Scheme::euler;
  double dt = 0.001;
  std::size_t subsample = 100;
  std::size_t condition_points = 30;
  std::size_t train_predict_points = 20;
  std::size_t test_predict_points = 60;
  std::size_t obs_min = 20;
  std::size_t obs_max = 26;
  double noise = 0.0;
  double edge_prob = -1.0;  // < 0 keeps the system's coupling graph
  InitialConditionConfig init;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

nlohmann::ordered_json to_json(const DatasetConfig& cfg);
/// Strict inverse of to_json: unknown fields raise ConfigError.
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct DatasetRecord {
  std::string split;  // "train" or "test"
  std::size_t index = 0;
  Trajectory trajectory;
  ObservationPlan plan;
};

struct Dataset {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<DatasetRecord> records;

  [[nodiscard]] std::vector<const DatasetRecord*> split(const std::string& name) const;
  [[nodiscard]] double scale() const;
};

/// Simulate every record, then normalize over the union of all splits so
/// the largest absolute feature equals 1.
Dataset generate_dataset(const DatasetConfig& cfg);

/// Largest absolute state component over every trajectory.
double normalization_scale(const std::vector<DatasetRecord>& records);

/// JSON-lines file: a header line then one record per line.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

nlohmann::ordered_json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& j, std::size_t line);

}  // namespace treat
