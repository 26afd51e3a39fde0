#include "treat/data.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace treat {

InteractionGraph sample_graph(std::size_t n, double edge_prob, std::uint64_t seed) {
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) {
    throw ConfigError("edge_prob must lie in [0, 1]");
  }
  InteractionGraph g(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < edge_prob) g.connect(i, j);
    }
  }
  return g;
}

void Trajectory::validate() const {
  if (times.size() != states.size()) {
    throw DatasetError("trajectory has " + std::to_string(times.size()) + " timestamps but " +
                       std::to_string(states.size()) + " states");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw DatasetError("timestamps not strictly increasing at index " + std::to_string(k));
    }
  }
  for (const auto& s : states) {
    if (s.n_agents() != system.n_agents || s.dq() != system.dq() || s.dp() != system.dp()) {
      throw DatasetError("state layout does not match the system");
    }
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DatasetError("scale must be positive");
}

StateVector Trajectory::normalized_state(std::size_t k) const {
  return states.at(k) * (1.0 / scale);
}

Scheme default_scheme(SystemKind kind) {
  switch (kind) {
    case SystemKind::triple_pendulum:
    case SystemKind::attractor:
      return Scheme::rk4;
    default:
      return Scheme::euler;
  }
}

Trajectory generate_trajectory(const SystemSpec& spec, const StateVector& initial_state,
                               Scheme scheme, double dt, std::size_t raw_steps,
                               std::size_t subsample_every) {
  spec.validate();
  if (subsample_every == 0) throw ConfigError("subsample must be >= 1");
  if (raw_steps == 0) throw ConfigError("steps must be >= 1");
  if (raw_steps % subsample_every != 0) {
    throw ConfigError("steps (" + std::to_string(raw_steps) + ") must be divisible by subsample (" +
                      std::to_string(subsample_every) + ")");
  }
  const TimeGrid grid(0.0, dt, raw_steps);
  StateTrajectory raw = integrate_subsampled(derivative_fn(spec), initial_state, grid, scheme,
                                             subsample_every);
  Trajectory out;
  out.system = spec;
  out.times = std::move(raw.times);
  out.states = std::move(raw.states);
  return out;
}

StateVector sample_initial_state(const SystemSpec& spec, const InitialConditionConfig& cfg,
                                 Rng& rng) {
  StateVector s = spec.zero_state();
  switch (spec.kind) {
    case SystemKind::triple_pendulum:
      for (std::size_t i = 0; i < 3; ++i) {
        s.q(i)[0] = rng.uniform(-cfg.pendulum_angle, cfg.pendulum_angle);
      }
      break;
    case SystemKind::attractor:
      s[0] = 0.0;
      s[1] = 0.0;
      s[2] = rng.uniform(cfg.attractor_z_min, cfg.attractor_z_max);
      break;
    default:
      for (double& v : s.values()) v = cfg.spring_scale * rng.normal();
      break;
  }
  return s;
}

Trajectory add_gaussian_noise(const Trajectory& traj, double sigma, std::uint64_t seed,
                              std::uint64_t stream) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (sigma == 0.0) return traj;
  Trajectory out = traj;
  Rng rng(seed, stream);
  for (auto& s : out.states) {
    for (double& v : s.values()) v += sigma * rng.normal();
  }
  return out;
}

AgentIndexSets irregular_subsample(std::size_t n_agents, std::size_t begin, std::size_t end,
                                   std::size_t n_obs_min, std::size_t n_obs_max, Rng& rng) {
  if (end <= begin) throw ConfigError("observation window is empty");
  if (n_obs_min == 0 || n_obs_min > n_obs_max) {
    throw ConfigError("observation counts need 1 <= obs_min <= obs_max");
  }
  const std::size_t window = end - begin;
  if (n_obs_max > window) {
    throw ConfigError("obs_max (" + std::to_string(n_obs_max) +
                      ") exceeds the condition window (" + std::to_string(window) + " points)");
  }
  AgentIndexSets out(n_agents);
  for (auto& indices : out) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(n_obs_min),
                                                            static_cast<std::int64_t>(n_obs_max)));
    indices = rng.sample_without_replacement(window, n);
    for (auto& k : indices) k += begin;
  }
  return out;
}

ObservationSet make_observation_set(const Trajectory& traj, const ObservationPlan& plan,
                                    std::size_t max_targets) {
  const std::size_t n_agents = traj.system.n_agents;
  if (plan.condition.size() != n_agents) {
    throw DatasetError("observation plan has " + std::to_string(plan.condition.size()) +
                       " agents, trajectory has " + std::to_string(n_agents));
  }
  if (plan.target_end > traj.size() || plan.target_begin >= plan.target_end) {
    throw DatasetError("observation plan target window out of range");
  }
  ObservationSet obs;
  obs.n_agents = n_agents;
  obs.graph = traj.system.coupling;
  obs.feature_dim = traj.system.dq() + traj.system.dp();
  const double inv = 1.0 / traj.scale;
  obs.condition.resize(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    if (plan.condition[i].empty()) {
      throw DatasetError("agent " + std::to_string(i) + " has no condition observations");
    }
    for (std::size_t k : plan.condition[i]) {
      if (k >= plan.target_begin) {
        throw DatasetError("condition observation of agent " + std::to_string(i) +
                           " is not before the prediction window");
      }
      obs.condition[i].times.push_back(traj.times.at(k));
      std::vector<double> f(traj.states[k].agent(i).begin(), traj.states[k].agent(i).end());
      for (double& v : f) v *= inv;
      obs.condition[i].features.push_back(std::move(f));
    }
  }
  std::size_t end = plan.target_end;
  if (max_targets > 0) end = std::min(end, plan.target_begin + max_targets);
  for (std::size_t k = plan.target_begin; k < end; ++k) {
    obs.target_times.push_back(traj.times[k]);
    std::vector<double> f(traj.states[k].values().begin(), traj.states[k].values().end());
    for (double& v : f) v *= inv;
    obs.targets.push_back(std::move(f));
  }
  return obs;
}

void DatasetConfig::validate() const {
  system.validate();
  if (n_train + n_test == 0) throw ConfigError("trajectories must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (subsample == 0) throw ConfigError("subsample must be >= 1");
  if (condition_points == 0) throw ConfigError("condition_points must be >= 1");
  if (train_predict_points < 2) throw ConfigError("train_predict_points must be >= 2");
  if (n_test > 0 && test_predict_points < 2) {
    throw ConfigError("test_predict_points must be >= 2");
  }
  if (obs_min == 0 || obs_min > obs_max) throw ConfigError("need 1 <= obs_min <= obs_max");
  if (obs_max > condition_points) {
    throw ConfigError("obs_max must not exceed condition_points");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (edge_prob > 1.0) throw ConfigError("edge_prob must be <= 1");
  if (workers == 0) throw ConfigError("workers must be >= 1");
}

nlohmann::ordered_json to_json(const DatasetConfig& cfg) {
  nlohmann::ordered_json j;
  j["system"] = to_json(cfg.system);
  j["n_train"] = cfg.n_train;
  j["n_test"] = cfg.n_test;
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["dt"] = cfg.dt;
  j["subsample"] = cfg.subsample;
  j["condition_points"] = cfg.condition_points;
  j["train_predict_points"] = cfg.train_predict_points;
  j["test_predict_points"] = cfg.test_predict_points;
  j["obs_min"] = cfg.obs_min;
  j["obs_max"] = cfg.obs_max;
  j["noise"] = cfg.noise;
  j["edge_prob"] = cfg.edge_prob;
  j["init"] = {{"spring_scale", cfg.init.spring_scale},
               {"pendulum_angle", cfg.init.pendulum_angle},
               {"attractor_z_min", cfg.init.attractor_z_min},
               {"attractor_z_max", cfg.init.attractor_z_max}};
  j["seed"] = cfg.seed;
  j["rng"] = std::string(kRngName);
  return j;
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  static const char* const kKnown[] = {
      "system",   "n_train", "n_test",  "scheme", "dt",         "subsample",
      "condition_points",    "train_predict_points", "test_predict_points",
      "obs_min",  "obs_max", "noise",   "edge_prob", "init",    "seed", "rng"};
  static const char* const kKnownInit[] = {"spring_scale", "pendulum_angle", "attractor_z_min",
                                           "attractor_z_max"};
  auto check = [](const nlohmann::json& obj, const auto& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
      bool ok = false;
      for (const char* k : known) ok = ok || item.key() == k;
      if (!ok) throw ConfigError("unknown " + where + " field '" + item.key() + "'");
    }
  };
  check(j, kKnown, "dataset");
  try {
    DatasetConfig cfg;
    if (j.contains("system")) cfg.system = system_spec_from_json(j.at("system"));
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.scheme = j.contains("scheme") ? parse_scheme(j.at("scheme").get<std::string>())
                                      : default_scheme(cfg.system.kind);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.subsample = j.value("subsample", cfg.subsample);
    cfg.condition_points = j.value("condition_points", cfg.condition_points);
    cfg.train_predict_points = j.value("train_predict_points", cfg.train_predict_points);
    cfg.test_predict_points = j.value("test_predict_points", cfg.test_predict_points);
    cfg.obs_min = j.value("obs_min", cfg.obs_min);
    cfg.obs_max = j.value("obs_max", cfg.obs_max);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.edge_prob = j.value("edge_prob", cfg.edge_prob);
    if (j.contains("init")) {
      const auto& init = j.at("init");
      check(init, kKnownInit, "init");
      cfg.init.spring_scale = init.value("spring_scale", cfg.init.spring_scale);
      cfg.init.pendulum_angle = init.value("pendulum_angle", cfg.init.pendulum_angle);
      cfg.init.attractor_z_min = init.value("attractor_z_min", cfg.init.attractor_z_min);
      cfg.init.attractor_z_max = init.value("attractor_z_max", cfg.init.attractor_z_max);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("rng") && j.at("rng").get<std::string>() != kRngName) {
      throw ConfigError("dataset rng '" + j.at("rng").get<std::string>() + "' is not supported");
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed dataset config: ") + e.what());
  }
}

std::vector<const DatasetRecord*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == name) out.push_back(&r);
  }
  return out;
}

double Dataset::scale() const { return records.empty() ? 1.0 : records.front().trajectory.scale; }

double normalization_scale(const std::vector<DatasetRecord>& records) {
  double worst = 0.0;
  for (const auto& r : records) {
    for (const auto& s : r.trajectory.states) {
      for (double v : s.values()) worst = std::max(worst, std::abs(v));
    }
  }
  return worst > 0.0 ? worst : 1.0;
}

namespace {

DatasetRecord generate_record(const DatasetConfig& cfg, std::size_t index) {
  DatasetRecord rec;
  const bool test = index >= cfg.n_train;
  rec.split = test ? "test" : "train";
  rec.index = index;

  SystemSpec spec = cfg.system;
  Rng init_rng(cfg.seed, 2 * index);
  if (cfg.edge_prob >= 0.0 && spec.is_spring() && !spec.anchored) {
    spec.coupling = sample_graph(spec.n_agents, cfg.edge_prob, init_rng.next_u64());
  }
  const StateVector s0 = sample_initial_state(spec, cfg.init, init_rng);

  const std::size_t predict = test ? cfg.test_predict_points : cfg.train_predict_points;
  const std::size_t points = cfg.condition_points + predict;
  const std::size_t raw_steps = (points - 1) * cfg.subsample;
  Trajectory traj;
  try {
    traj = generate_trajectory(spec, s0, cfg.scheme, cfg.dt, raw_steps, cfg.subsample);
  } catch (const IntegrationError& e) {
    throw IntegrationError("record " + std::to_string(index) + ": " + e.detail(), e.step());
  }
  traj.seed = cfg.seed;
  traj.stream = 2 * index;
  if (cfg.noise > 0.0) {
    // Separate key so noise draws never overlap the initial-condition stream.
    traj = add_gaussian_noise(traj, cfg.noise, cfg.seed ^ 0x6e6f697365ull, 2 * index);
  }

  Rng obs_rng(cfg.seed, 2 * index + 1);
  rec.plan.condition = irregular_subsample(spec.n_agents, 0, cfg.condition_points, cfg.obs_min,
                                           cfg.obs_max, obs_rng);
  rec.plan.target_begin = cfg.condition_points;
  rec.plan.target_end = points;
  rec.trajectory = std::move(traj);
  return rec;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const std::size_t total = cfg.n_train + cfg.n_test;
  Dataset ds;
  ds.records.resize(total);

  const std::size_t workers = std::min(cfg.workers, total);
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) ds.records[i] = generate_record(cfg, i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < total; i += workers) ds.records[i] = generate_record(cfg, i);
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

  const double scale = normalization_scale(ds.records);
  for (auto& r : ds.records) r.trajectory.scale = scale;

  ds.meta = nlohmann::ordered_json::object();
  ds.meta["config"] = to_json(cfg);
  ds.meta["scale"] = scale;
  ds.meta["n_train"] = cfg.n_train;
  ds.meta["n_test"] = cfg.n_test;
  ds.meta["reversibility"] = std::string(to_string(classify_reversibility(cfg.system)));
  ds.meta["spring_topology"] = cfg.system.is_spring()
                                   ? (cfg.system.anchored ? "anchored" : "pairwise")
                                   : "n/a";
  return ds;
}

}  // namespace treat
