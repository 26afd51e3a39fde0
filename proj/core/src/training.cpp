#include "treat/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "treat/rng.hpp"

namespace treat {

using ad::Tensor;
using ad::Var;

void TrainingConfig::validate() const {
  model.validate();
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0)) {
    throw ConfigError("max_skip_fraction must lie in [0, 1]");
  }
}

nlohmann::ordered_json to_json(const TrainingConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"] = to_json(cfg.model);
  j["loss_variant"] = std::string(to_string(cfg.variant));
  j["alpha"] = cfg.alpha;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["patience"] = cfg.patience;
  j["val_fraction"] = cfg.val_fraction;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["max_skip_fraction"] = cfg.max_skip_fraction;
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  static const char* const kKnown[] = {"model",      "loss_variant", "alpha",       "lr",
                                       "weight_decay", "batch_size", "epochs",      "patience",
                                       "val_fraction", "seed",       "workers",     "max_skip_fraction"};
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown training field '" + item.key() + "'");
  }
  try {
    TrainingConfig cfg;
    if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
    if (j.contains("loss_variant")) {
      cfg.variant = parse_loss_variant(j.at("loss_variant").get<std::string>());
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.max_skip_fraction = j.value("max_skip_fraction", cfg.max_skip_fraction);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
}

std::vector<ObservationSet> observation_sets(const Dataset& ds, const std::string& split,
                                             std::size_t max_targets) {
  std::vector<ObservationSet> out;
  for (const auto* r : ds.split(split)) {
    out.push_back(make_observation_set(r->trajectory, r->plan, max_targets));
  }
  return out;
}

std::pair<std::vector<ObservationSet>, std::vector<ObservationSet>> split_validation(
    std::vector<ObservationSet> sets, double fraction) {
  std::size_t n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(sets.size())));
  if (fraction > 0.0 && sets.size() >= 2) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, sets.size() > 0 ? sets.size() - 1 : 0);
  std::vector<ObservationSet> val(std::make_move_iterator(sets.end() - static_cast<std::ptrdiff_t>(n_val)),
                                  std::make_move_iterator(sets.end()));
  sets.resize(sets.size() - n_val);
  return {std::move(sets), std::move(val)};
}

namespace {

BatchGradients chunk_gradients(const ModelParams& params, const ModelConfig& cfg,
                               const std::vector<const ObservationSet*>& chunk,
                               LossVariant variant, double alpha) {
  ad::Tape tape;
  const BoundParams bp = bind(tape, params);
  const BatchLoss loss = batch_loss(tape, bp, cfg, chunk, variant, alpha, true);
  tape.backward(loss.total);
  BatchGradients out;
  out.grads.reserve(bp.vars.size());
  for (const Var& v : bp.vars) {
    out.grads.push_back(tape.has_grad(v.id) ? tape.grad(v.id) : Tensor(v.value().shape));
  }
  out.l_pred = loss.l_pred_value;
  out.l_rev = loss.l_rev_value;
  out.total = loss.total_value;
  return out;
}

}  // namespace

BatchGradients batch_gradients(const ModelParams& params, const ModelConfig& cfg,
                               const std::vector<const ObservationSet*>& batch,
                               LossVariant variant, double alpha, std::size_t workers) {
  if (batch.empty()) throw ConfigError("empty batch");
  const std::size_t n_chunks = std::min(workers, batch.size());
  if (n_chunks <= 1) return chunk_gradients(params, cfg, batch, variant, alpha);

  std::vector<std::vector<const ObservationSet*>> chunks(n_chunks);
  for (std::size_t k = 0; k < batch.size(); ++k) chunks[k * n_chunks / batch.size()].push_back(batch[k]);
  std::vector<BatchGradients> parts(n_chunks);
  std::vector<std::exception_ptr> errors(n_chunks);
  std::vector<std::thread> pool;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    pool.emplace_back([&, c] {
      try {
        parts[c] = chunk_gradients(params, cfg, chunks[c], variant, alpha);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  BatchGradients out;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const double w = static_cast<double>(chunks[c].size()) * inv_b;
    if (out.grads.empty()) {
      for (const auto& g : parts[c].grads) out.grads.emplace_back(g.shape);
    }
    for (std::size_t p = 0; p < out.grads.size(); ++p) {
      for (std::size_t i = 0; i < out.grads[p].size(); ++i) {
        out.grads[p].data[i] += w * parts[c].grads[p].data[i];
      }
    }
    out.l_pred += w * parts[c].l_pred;
    out.l_rev += w * parts[c].l_rev;
    out.total += w * parts[c].total;
  }
  return out;
}

TrainResult train(const std::vector<ObservationSet>& train_set,
                  const std::vector<ObservationSet>& val_set, const TrainingConfig& cfg,
                  const ModelParams* initial) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");

  TrainResult result;
  ModelParams params = initial != nullptr ? *initial : init_params(cfg.model, cfg.seed);
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  AdamW opt(cfg.lr, cfg.weight_decay);
  const double alpha = cfg.effective_alpha();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle(cfg.seed, 0x7368756600000000ull + epoch);
    for (std::size_t k = order.size(); k > 1; --k) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(k - 1)));
      std::swap(order[k - 1], order[j]);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t processed = 0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      ++n_batches;
      std::vector<const ObservationSet*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&train_set[order[k]]);
      }
      BatchGradients bg;
      try {
        bg = batch_gradients(params, cfg.model, batch, cfg.variant, alpha, cfg.workers);
      } catch (const DivergenceError&) {
        ++rec.skipped;
        continue;
      }
      try {
        opt.step(params, bg.grads);
      } catch (const DivergenceError&) {
        ++rec.skipped;
        ++result.aborted_epochs;
        break;
      }
      rec.l_pred += bg.l_pred;
      rec.l_reverse += bg.l_rev;
      rec.total += bg.total;
      ++processed;
    }
    result.skipped_batches += rec.skipped;
    if (processed == 0 ||
        static_cast<double>(rec.skipped) > cfg.max_skip_fraction * static_cast<double>(n_batches)) {
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + " (" +
                            std::to_string(rec.skipped) + " of " + std::to_string(n_batches) +
                            " batches failed)");
    }
    rec.l_pred /= static_cast<double>(processed);
    rec.l_reverse /= static_cast<double>(processed);
    rec.total /= static_cast<double>(processed);

    const auto& monitor = val_set.empty() ? train_set : val_set;
    const EvalReport val = evaluate(params, cfg.model, monitor, {}, 64);
    rec.val_mse = val.mse;
    rec.val_l_reverse = val.l_reverse;
    result.history.push_back(rec);

    if (val.n_trajectories > 0 && std::isfinite(val.mse) && val.mse < best_val) {
      best_val = val.mse;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (result.best_epoch == 0) {
    throw DivergenceError("no epoch produced a finite validation error");
  }
  result.params = std::move(best);
  result.best_val_mse = best_val;
  return result;
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                    const std::vector<ObservationSet>& sets,
                    const std::vector<std::size_t>& bucket_lengths, std::size_t batch_size) {
  EvalReport report;
  if (sets.empty()) return report;
  report.horizon = sets[0].n_targets();
  std::vector<double> bucket_sum(bucket_lengths.size(), 0.0);
  double l_rev_sum = 0.0;
  double l_pred_sum = 0.0;

  for (std::size_t start = 0; start < sets.size(); start += batch_size) {
    std::vector<const ObservationSet*> batch;
    for (std::size_t k = start; k < std::min(sets.size(), start + batch_size); ++k) {
      batch.push_back(&sets[k]);
    }
    ad::Tape tape;
    const BoundParams bp = bind(tape, params, false);
    std::vector<Var> y_fwd, y_rev, y_true;
    try {
      const auto times = batch_target_times(batch);
      const EdgeList edges = batch_edges(batch);
      const Var z0 = encode_initial_states(tape, bp, cfg, batch);
      const auto z_fwd = rollout_forward(bp, cfg, z0, times, edges);
      for (const Var& z : z_fwd) y_fwd.push_back(decode(bp, cfg, z));
      const auto z_rev = rollout_reverse(bp, cfg, z_fwd.back(), times, edges);
      for (const Var& z : z_rev) y_rev.push_back(decode(bp, cfg, z));
      y_true = batch_targets(tape, batch);
    } catch (const DivergenceError&) {
      // Retry one trajectory at a time and drop only the diverged ones.
      if (batch.size() > 1) {
        for (const auto* obs : batch) {
          const EvalReport single = evaluate(params, cfg, {*obs}, bucket_lengths, 1);
          if (single.n_trajectories == 0) {
            ++report.skipped;
            continue;
          }
          ++report.n_trajectories;
          report.mse_per_trajectory.push_back(single.mse);
          report.max_error_gt_rev_per_trajectory.push_back(single.max_error_gt_rev);
          for (std::size_t b = 0; b < bucket_lengths.size(); ++b) {
            for (const auto& [len, v] : single.buckets) {
              if (len == bucket_lengths[b]) bucket_sum[b] += v;
            }
          }
          l_rev_sum += single.l_reverse;
          l_pred_sum += single.l_pred;
        }
      } else {
        ++report.skipped;
      }
      continue;
    }

    const std::size_t K = y_fwd.size() - 1;
    const std::size_t f = batch[0]->feature_dim;
    std::size_t row = 0;
    for (const auto* obs : batch) {
      const std::size_t n = obs->n_agents;
      std::vector<double> sq_per_k(K + 1, 0.0);
      double rev_sq = 0.0;
      std::vector<double> agent_max(n, 0.0);
      for (std::size_t k = 0; k <= K; ++k) {
        const Tensor& yf = y_fwd[k].value();
        const Tensor& yt = y_true[k].value();
        const Tensor& yr = y_rev[K - k].value();
        for (std::size_t i = 0; i < n; ++i) {
          double gt_rev = 0.0;
          for (std::size_t c = 0; c < f; ++c) {
            const std::size_t idx = (row + i) * f + c;
            const double d = yf.data[idx] - yt.data[idx];
            sq_per_k[k] += d * d;
            const double dr = yf.data[idx] - yr.data[idx];
            rev_sq += dr * dr;
            const double dg = yt.data[idx] - yr.data[idx];
            gt_rev += dg * dg;
          }
          agent_max[i] = std::max(agent_max[i], std::sqrt(gt_rev));
        }
      }
      double total_sq = 0.0;
      for (double v : sq_per_k) total_sq += v;
      const double denom = static_cast<double>(n * f);
      report.mse_per_trajectory.push_back(total_sq / (denom * static_cast<double>(K + 1)));
      report.max_error_gt_rev_per_trajectory.push_back(*std::max_element(agent_max.begin(), agent_max.end()));
      for (std::size_t b = 0; b < bucket_lengths.size(); ++b) {
        const std::size_t len = std::min(bucket_lengths[b], K + 1);
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) s += sq_per_k[k];
        bucket_sum[b] += s / (denom * static_cast<double>(len));
      }
      l_rev_sum += rev_sq;
      l_pred_sum += total_sq;
      ++report.n_trajectories;
      row += n;
    }
  }

  if (report.n_trajectories == 0) {
    report.mse = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  const double inv = 1.0 / static_cast<double>(report.n_trajectories);
  for (double v : report.mse_per_trajectory) report.mse += v * inv;
  for (double v : report.max_error_gt_rev_per_trajectory) report.max_error_gt_rev += v * inv;
  report.l_reverse = l_rev_sum * inv;
  report.l_pred = l_pred_sum * inv;
  for (std::size_t b = 0; b < bucket_lengths.size(); ++b) {
    if (bucket_lengths[b] <= report.horizon) {
      report.buckets.emplace_back(bucket_lengths[b], bucket_sum[b] * inv);
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n_trajectories"] = report.n_trajectories;
  j["skipped"] = report.skipped;
  j["horizon"] = report.horizon;
  j["mse"] = report.mse;
  j["mse_1e-2"] = report.mse * 100.0;
  auto buckets = nlohmann::ordered_json::array();
  for (const auto& [len, v] : report.buckets) {
    buckets.push_back({{"length", len}, {"mse", v}, {"mse_1e-2", v * 100.0}});
  }
  j["buckets"] = std::move(buckets);
  j["max_error_gt_rev"] = report.max_error_gt_rev;
  j["l_reverse"] = report.l_reverse;
  j["l_pred"] = report.l_pred;
  j["mse_per_trajectory"] = report.mse_per_trajectory;
  j["max_error_gt_rev_per_trajectory"] = report.max_error_gt_rev_per_trajectory;
  return j;
}

AlphaSearch tune_alpha(const std::vector<ObservationSet>& train_set,
                       const std::vector<ObservationSet>& val_set, TrainingConfig cfg,
                       const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  AlphaSearch search;
  bool have = false;
  for (double a : alphas) {
    cfg.alpha = a;
    TrainResult r = train(train_set, val_set, cfg);
    search.val_mse.emplace_back(a, r.best_val_mse);
    if (!have || r.best_val_mse < search.best.best_val_mse) {
      search.best = std::move(r);
      search.best_alpha = a;
      have = true;
    }
  }
  return search;
}

}  // namespace treat
