#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treat/autodiff.hpp"
#include "treat/data.hpp"
#include "treat/dynamics.hpp"

namespace treat {

/// Architecture hyperparameters. Latent width is d_enc + d_aug.
struct ModelConfig {
  std::size_t input_dim = 2;      // features per agent observation
  std::size_t output_dim = 2;     // decoded features per agent
  std::size_t d_hidden = 64;      // encoder embedding / attention width (even)
  std::size_t d_enc = 16;
  std::size_t d_aug = 16;
  std::size_t attention_layers = 1;
  bool spatial_round = false;     // one message round between agents after pooling
  std::size_t ode_hidden = 64;
  std::size_t decoder_hidden = 32;  // 0 gives a single linear layer
  Scheme scheme = Scheme::rk4;
  std::size_t substeps = 1;       // solver steps per target interval

  [[nodiscard]] std::size_t latent_dim() const noexcept { return d_enc + d_aug; }
  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named weight tensors in a fixed order.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    ad::Tensor value;
  };

  void add(std::string name, ad::Tensor value);
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
  [[nodiscard]] const ad::Tensor& get(const std::string& name) const;
  ad::Tensor& get(const std::string& name);
  [[nodiscard]] std::vector<Entry>& entries() noexcept { return entries_; }
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const;
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::vector<Entry> entries_;
};

/// Parameters placed on a tape, one Var per entry (same order).
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<ad::Var> vars;

  [[nodiscard]] ad::Var operator[](const std::string& name) const;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable = true);

/// Glorot-uniform weights, zero biases, drawn from Rng(seed, 0x6d6f64656c).
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zero_params(const ModelConfig& cfg);

/// Sinusoidal encoding: out[2i] = sin(dt / 10000^(2i/d)), out[2i+1] = cos(...).
std::vector<double> temporal_encoding(double dt, std::size_t d);

/// Directed edges (src -> dst) over the rows of a batched latent matrix.
struct EdgeList {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::size_t n_rows = 0;
};

/// Edges for one sample: both directions of every coupling edge, or a
/// self-loop when the sample has a single agent.
EdgeList edges_for(const InteractionGraph& graph);
/// Block-diagonal union of the per-sample graphs, rows b*N + i.
EdgeList batch_edges(const std::vector<const ObservationSet*>& batch);

/// Latent initial states (rows b*N + i, latent_dim cols). The augmented
/// columns are exactly zero. Throws ConfigError for an agent without
/// observations.
ad::Var encode_initial_states(ad::Tape& tape, const BoundParams& bp, const ModelConfig& cfg,
                              const std::vector<const ObservationSet*>& batch);

/// GNN vector field g(Z).
ad::Var gnn_ode_func(const BoundParams& bp, const ModelConfig& cfg, ad::Var z,
                     const EdgeList& edges);

ad::Var decode(const BoundParams& bp, const ModelConfig& cfg, ad::Var z);

using LatentField = std::function<ad::Var(ad::Var)>;

/// Integrate `field` (sign +1) or its negation (sign -1) from z0 across the
/// given intervals, `substeps` solver steps each. Returns K+1 latents,
/// the first being z0. Throws DivergenceError on a non-finite latent.
std::vector<ad::Var> rollout(ad::Var z0, const std::vector<double>& intervals, Scheme scheme,
                             std::size_t substeps, const LatentField& field, double sign);

/// Forward latents on the batch's target times.
std::vector<ad::Var> rollout_forward(const BoundParams& bp, const ModelConfig& cfg, ad::Var z0,
                                     const std::vector<double>& target_times,
                                     const EdgeList& edges);

/// Integrate -g from the final forward latent over the same intervals in
/// reverse order. Output index k sits at reverse time t'_k and pairs with
/// forward index K - k.
std::vector<ad::Var> rollout_reverse(const BoundParams& bp, const ModelConfig& cfg,
                                     ad::Var z_fwd_end, const std::vector<double>& target_times,
                                     const EdgeList& edges);

/// Shared target grid of a batch. Throws ConfigError when samples disagree.
std::vector<double> batch_target_times(const std::vector<const ObservationSet*>& batch);

/// Intervals t_{k+1} - t_k.
std::vector<double> intervals_of(const std::vector<double>& times);

/// Targets of the batch as one (B*N x feature_dim) constant per target time.
std::vector<ad::Var> batch_targets(ad::Tape& tape, const std::vector<const ObservationSet*>& batch);

/// Checkpoint with config and parameters. Doubles are written in shortest
/// round-trip form, so save/load is lossless.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params, const nlohmann::ordered_json& extra = {});

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  nlohmann::json extra;
};

/// Throws ArtifactMismatchError if parameter names or shapes do not match
/// the architecture the stored config implies.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace treat
