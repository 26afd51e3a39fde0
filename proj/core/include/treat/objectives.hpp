#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "treat/autodiff.hpp"
#include "treat/model.hpp"

namespace treat {

/// Which reversal term joins the reconstruction loss.
///   treat:  forward vs reverse rollout from the forward end point
///   gt_rev: ground truth vs that reverse rollout
///   rev2:   forward vs a rollout of -g started from z(t0), latent R = identity
///   none:   reconstruction only (alpha is ignored)
enum class LossVariant { treat, gt_rev, rev2, none };

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

/// sum_k ||y_true[k] - y_fwd[k]||^2 over every row and column.
ad::Var reconstruction_loss(const std::vector<ad::Var>& y_fwd, const std::vector<ad::Var>& y_true);

/// sum_k ||y_fwd[k] - y_rev[K - k]||^2.
ad::Var reversal_loss_treat(const std::vector<ad::Var>& y_fwd, const std::vector<ad::Var>& y_rev);

/// sum_k ||y_true[k] - y_rev[K - k]||^2.
ad::Var reversal_loss_gt_rev(const std::vector<ad::Var>& y_true,
                             const std::vector<ad::Var>& y_rev);

/// sum_k ||y_fwd[k] - y_rev2[k]||^2, where y_rev2 is decoded from -g
/// integrated forward from the (unreversed) initial latent.
ad::Var reversal_loss_rev2(const std::vector<ad::Var>& y_fwd, const std::vector<ad::Var>& y_rev2);

ad::Var combined_loss(ad::Var l_pred, ad::Var l_rev, double alpha);
double combined_loss(double l_pred, double l_rev, double alpha);

/// Loss terms for one batch, each averaged over the batch's trajectories.
struct BatchLoss {
  ad::Var total;
  ad::Var l_pred;
  /// The variant's reversal term; for `none`, the treat-style term recorded
  /// after `total`; backward() never reaches it.
  ad::Var l_rev;
  double l_pred_value = 0.0;
  double l_rev_value = 0.0;
  double total_value = 0.0;
};

/// Encode, roll out and score one batch. With `diagnostic_reverse` false the
/// `none` variant skips the reverse rollout entirely.
BatchLoss batch_loss(ad::Tape& tape, const BoundParams& bp, const ModelConfig& cfg,
                     const std::vector<const ObservationSet*>& batch, LossVariant variant,
                     double alpha, bool diagnostic_reverse = true);

/// AdamW with bias-corrected moments and decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  /// Throws DivergenceError, leaving `params` untouched, when any gradient
  /// entry is non-finite.
  void step(ModelParams& params, const std::vector<ad::Tensor>& grads);

  [[nodiscard]] double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }
  [[nodiscard]] std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<ad::Tensor> m_, v_;
};

}  // namespace treat
