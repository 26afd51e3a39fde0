#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treat/data.hpp"
#include "treat/model.hpp"
#include "treat/objectives.hpp"

namespace treat {

struct TrainingConfig {
  ModelConfig model;
  LossVariant variant = LossVariant::treat;
  double alpha = 0.5;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 40;
  std::size_t patience = 10;        // epochs without validation gain; 0 disables
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;          // > 1 splits batches across threads
  double max_skip_fraction = 0.5;   // divergent batches tolerated per epoch

  /// alpha actually applied (0 for the `none` variant).
  [[nodiscard]] double effective_alpha() const noexcept {
    return variant == LossVariant::none ? 0.0 : alpha;
  }
  void validate() const;
};

nlohmann::ordered_json to_json(const TrainingConfig& cfg);
/// Strict: unknown fields raise ConfigError.
TrainingConfig training_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;
  double l_pred = 0.0;
  double l_reverse = 0.0;
  double total = 0.0;
  double val_mse = 0.0;
  double val_l_reverse = 0.0;
  std::size_t skipped = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t skipped_batches = 0;
  std::size_t aborted_epochs = 0;
};

/// Observation sets of one split. `max_targets` truncates prediction windows.
std::vector<ObservationSet> observation_sets(const Dataset& ds, const std::string& split,
                                             std::size_t max_targets = 0);

/// Split off the last ceil(fraction * n) sets (at least one when n >= 2).
std::pair<std::vector<ObservationSet>, std::vector<ObservationSet>> split_validation(
    std::vector<ObservationSet> sets, double fraction);

/// Per-batch gradients (same order as params.entries()) and loss values.
struct BatchGradients {
  std::vector<ad::Tensor> grads;
  double l_pred = 0.0;
  double l_rev = 0.0;
  double total = 0.0;
};

BatchGradients batch_gradients(const ModelParams& params, const ModelConfig& cfg,
                               const std::vector<const ObservationSet*>& batch,
                               LossVariant variant, double alpha, std::size_t workers = 1);

/// Mini-batch AdamW with early stopping on validation MSE; the best
/// parameters are restored at the end. Deterministic when workers == 1.
/// Throws DivergenceError when too many batches diverge.
TrainResult train(const std::vector<ObservationSet>& train_set,
                  const std::vector<ObservationSet>& val_set, const TrainingConfig& cfg,
                  const ModelParams* initial = nullptr);

struct EvalReport {
  std::size_t n_trajectories = 0;
  std::size_t skipped = 0;
  std::size_t horizon = 0;
  std::vector<double> mse_per_trajectory;
  double mse = 0.0;
  /// (prediction length, mean MSE over the first `length` targets).
  std::vector<std::pair<std::size_t, double>> buckets;
  /// max_k ||y_i(t_k) - yrev_i(t'_{K-k})||_2 per trajectory, maxed over agents.
  std::vector<double> max_error_gt_rev_per_trajectory;
  double max_error_gt_rev = 0.0;  // mean over trajectories
  /// Mean treat-style reversal loss and reconstruction loss per trajectory.
  double l_reverse = 0.0;
  double l_pred = 0.0;
};

/// MSE on normalized features plus reversal diagnostics over the full
/// horizon of each set.
EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                    const std::vector<ObservationSet>& sets,
                    const std::vector<std::size_t>& bucket_lengths = {20, 40, 60},
                    std::size_t batch_size = 32);

nlohmann::ordered_json to_json(const EvalReport& report);

/// Train once per alpha and keep the run with the lowest best validation MSE.
struct AlphaSearch {
  double best_alpha = 0.0;
  std::vector<std::pair<double, double>> val_mse;  // (alpha, best val MSE)
  TrainResult best;
};

AlphaSearch tune_alpha(const std::vector<ObservationSet>& train_set,
                       const std::vector<ObservationSet>& val_set, TrainingConfig cfg,
                       const std::vector<double>& alphas);

}  // namespace treat
