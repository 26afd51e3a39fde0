#include "treat/objectives.hpp"

#include <cmath>
#include <string>

namespace treat {

using ad::Var;

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::treat: return "treat";
    case LossVariant::gt_rev: return "gt_rev";
    case LossVariant::rev2: return "rev2";
    case LossVariant::none: return "none";
  }
  return "unknown";
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "treat") return LossVariant::treat;
  if (name == "gt_rev" || name == "gt-rev") return LossVariant::gt_rev;
  if (name == "rev2") return LossVariant::rev2;
  if (name == "none") return LossVariant::none;
  throw ConfigError("unknown loss variant '" + std::string(name) +
                    "' (expected treat|gt_rev|rev2|none)");
}

namespace {

Var paired_sum(const char* what, const std::vector<Var>& a, const std::vector<Var>& b,
               bool reversed) {
  if (a.empty() || a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": sequences have lengths " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  const std::size_t K = a.size() - 1;
  Var total = ad::l2_norm_sq(a[0] - b[reversed ? K : 0]);
  for (std::size_t k = 1; k <= K; ++k) {
    total = total + ad::l2_norm_sq(a[k] - b[reversed ? K - k : k]);
  }
  return total;
}

}  // namespace

Var reconstruction_loss(const std::vector<Var>& y_fwd, const std::vector<Var>& y_true) {
  return paired_sum("reconstruction_loss", y_true, y_fwd, false);
}

Var reversal_loss_treat(const std::vector<Var>& y_fwd, const std::vector<Var>& y_rev) {
  return paired_sum("reversal_loss_treat", y_fwd, y_rev, true);
}

Var reversal_loss_gt_rev(const std::vector<Var>& y_true, const std::vector<Var>& y_rev) {
  return paired_sum("reversal_loss_gt_rev", y_true, y_rev, true);
}

Var reversal_loss_rev2(const std::vector<Var>& y_fwd, const std::vector<Var>& y_rev2) {
  return paired_sum("reversal_loss_rev2", y_fwd, y_rev2, false);
}

Var combined_loss(Var l_pred, Var l_rev, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  return l_pred + alpha * l_rev;
}

double combined_loss(double l_pred, double l_rev, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  return l_pred + alpha * l_rev;
}

BatchLoss batch_loss(ad::Tape& tape, const BoundParams& bp, const ModelConfig& cfg,
                     const std::vector<const ObservationSet*>& batch, LossVariant variant,
                     double alpha, bool diagnostic_reverse) {
  const std::vector<double> times = batch_target_times(batch);
  const EdgeList edges = batch_edges(batch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  const Var z0 = encode_initial_states(tape, bp, cfg, batch);
  const std::vector<Var> z_fwd = rollout_forward(bp, cfg, z0, times, edges);
  std::vector<Var> y_fwd;
  y_fwd.reserve(z_fwd.size());
  for (const Var& z : z_fwd) y_fwd.push_back(decode(bp, cfg, z));
  const std::vector<Var> y_true = batch_targets(tape, batch);

  auto decode_all = [&](const std::vector<Var>& zs) {
    std::vector<Var> ys;
    ys.reserve(zs.size());
    for (const Var& z : zs) ys.push_back(decode(bp, cfg, z));
    return ys;
  };

  BatchLoss out;
  out.l_pred = ad::scale(reconstruction_loss(y_fwd, y_true), inv_b);
  switch (variant) {
    case LossVariant::treat:
    case LossVariant::gt_rev: {
      const auto y_rev = decode_all(rollout_reverse(bp, cfg, z_fwd.back(), times, edges));
      const Var raw = variant == LossVariant::treat ? reversal_loss_treat(y_fwd, y_rev)
                                                    : reversal_loss_gt_rev(y_true, y_rev);
      out.l_rev = ad::scale(raw, inv_b);
      out.total = combined_loss(out.l_pred, out.l_rev, alpha);
      break;
    }
    case LossVariant::rev2: {
      const LatentField g = [&](Var z) { return gnn_ode_func(bp, cfg, z, edges); };
      const auto y_rev2 =
          decode_all(rollout(z0, intervals_of(times), cfg.scheme, cfg.substeps, g, -1.0));
      out.l_rev = ad::scale(reversal_loss_rev2(y_fwd, y_rev2), inv_b);
      out.total = combined_loss(out.l_pred, out.l_rev, alpha);
      break;
    }
    case LossVariant::none: {
      out.total = out.l_pred;
      if (diagnostic_reverse) {
        const auto y_rev = decode_all(rollout_reverse(bp, cfg, z_fwd.back(), times, edges));
        out.l_rev = ad::scale(reversal_loss_treat(y_fwd, y_rev), inv_b);
      }
      break;
    }
  }
  out.l_pred_value = out.l_pred.item();
  out.l_rev_value = out.l_rev.tape != nullptr ? out.l_rev.item() : 0.0;
  out.total_value = out.total.item();
  return out;
}

// ---------------------------------------------------------------------------
// AdamW

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

void AdamW::step(ModelParams& params, const std::vector<ad::Tensor>& grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size()) throw ShapeError("AdamW: gradient count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != entries[k].value.size()) {
      throw ShapeError("AdamW: gradient shape mismatch for '" + entries[k].name + "'");
    }
    if (!grads[k].all_finite()) {
      throw DivergenceError("non-finite gradient for parameter '" + entries[k].name + "'");
    }
  }
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.value.shape);
      v_.emplace_back(e.value.shape);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& w = entries[k].value.data;
    auto& m = m_[k].data;
    auto& v = v_[k].data;
    const auto& g = grads[k].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w[i]);
    }
  }
}

}  // namespace treat
