#include <doctest.h>

#include <cmath>

#include "treat/training.hpp"

using namespace treat;

namespace {

std::vector<ObservationSet> make_sets(std::size_t n, std::uint64_t seed, std::size_t agents = 2) {
  DatasetConfig dc;
  dc.system = SystemSpec::defaults(SystemKind::simple_spring, agents);
  dc.n_train = n;
  dc.condition_points = 8;
  dc.train_predict_points = 5;
  dc.obs_min = 3;
  dc.obs_max = 6;
  dc.seed = seed;
  return observation_sets(generate_dataset(dc), "train");
}

ModelConfig small_model(std::size_t features) {
  ModelConfig cfg;
  cfg.input_dim = cfg.output_dim = features;
  cfg.d_hidden = 8;
  cfg.d_enc = 4;
  cfg.d_aug = 4;
  cfg.ode_hidden = 8;
  cfg.decoder_hidden = 8;
  return cfg;
}

/// Replace every target with the model's own decoded forward prediction.
void relabel_with_teacher(std::vector<ObservationSet>& sets, const ModelParams& params,
                          const ModelConfig& cfg) {
  for (auto& s : sets) {
    ad::Tape tape;
    const auto bp = bind(tape, params, false);
    const std::vector<const ObservationSet*> batch{&s};
    const auto z0 = encode_initial_states(tape, bp, cfg, batch);
    const auto z = rollout_forward(bp, cfg, z0, s.target_times, batch_edges(batch));
    for (std::size_t k = 0; k < z.size(); ++k) s.targets[k] = decode(bp, cfg, z[k]).value().data;
  }
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("validation split sizes") {
    auto sets = make_sets(10, 1);
    auto [tr, va] = split_validation(sets, 0.1);
    CHECK(tr.size() == 9);
    CHECK(va.size() == 1);
    CHECK(va[0].targets == sets[9].targets);
    auto [tr2, va2] = split_validation(make_sets(2, 1), 0.0);
    CHECK(tr2.size() == 2);
    CHECK(va2.empty());
    auto [tr3, va3] = split_validation(make_sets(2, 1), 0.9);
    CHECK(tr3.size() == 1);
    CHECK(va3.size() == 1);
  }

  TEST_CASE("teacher weights reproduce teacher-generated targets") {
    auto sets = make_sets(6, 4);
    const auto cfg = small_model(sets[0].feature_dim);
    const auto teacher = init_params(cfg, 77);
    relabel_with_teacher(sets, teacher, cfg);
    const auto report = evaluate(teacher, cfg, sets, {3, 5}, 4);
    CHECK(report.n_trajectories == 6);
    CHECK(report.mse < 1e-8);
    const auto other = evaluate(init_params(cfg, 78), cfg, sets, {5});
    CHECK(other.mse > 1e-4);
  }

  TEST_CASE("evaluation buckets and metrics are consistent") {
    const auto sets = make_sets(4, 2);
    const auto cfg = small_model(sets[0].feature_dim);
    const auto params = init_params(cfg, 5);
    const auto r = evaluate(params, cfg, sets, {1, 3, 5, 9});
    CHECK(r.horizon == 5);
    REQUIRE(r.buckets.size() == 3);
    CHECK(r.buckets.back().second == doctest::Approx(r.mse));
    double mean = 0;
    for (double v : r.mse_per_trajectory) mean += v / 4.0;
    CHECK(mean == doctest::Approx(r.mse));
    double mean_max = 0;
    for (double v : r.max_error_gt_rev_per_trajectory) mean_max += v / 4.0;
    CHECK(mean_max == doctest::Approx(r.max_error_gt_rev));
    const auto batched = evaluate(params, cfg, sets, {5}, 1);
    CHECK(batched.mse == doctest::Approx(r.mse).epsilon(1e-12));
  }

  TEST_CASE("threaded gradients match single-threaded ones") {
    const auto sets = make_sets(6, 3);
    const auto cfg = small_model(sets[0].feature_dim);
    const auto params = init_params(cfg, 9);
    std::vector<const ObservationSet*> batch;
    for (const auto& s : sets) batch.push_back(&s);
    const auto a = batch_gradients(params, cfg, batch, LossVariant::treat, 0.5, 1);
    const auto b = batch_gradients(params, cfg, batch, LossVariant::treat, 0.5, 3);
    CHECK(b.total == doctest::Approx(a.total).epsilon(1e-12));
    for (std::size_t e = 0; e < a.grads.size(); ++e)
      for (std::size_t i = 0; i < a.grads[e].size(); ++i)
        CHECK(b.grads[e].data[i] == doctest::Approx(a.grads[e].data[i]).epsilon(1e-10));
  }

  TEST_CASE("the none variant ignores alpha and records a diagnostic reversal") {
    const auto sets = make_sets(2, 3);
    const auto cfg = small_model(sets[0].feature_dim);
    const auto params = init_params(cfg, 9);
    const std::vector<const ObservationSet*> batch{&sets[0], &sets[1]};
    const auto a = batch_gradients(params, cfg, batch, LossVariant::none, 0.0);
    const auto b = batch_gradients(params, cfg, batch, LossVariant::none, 5.0);
    CHECK(a.total == b.total);
    CHECK(a.total == a.l_pred);
    CHECK(a.l_rev > 0.0);
    const auto t = batch_gradients(params, cfg, batch, LossVariant::treat, 2.0);
    CHECK(t.total == doctest::Approx(t.l_pred + 2.0 * t.l_rev));
    CHECK(t.l_rev == doctest::Approx(a.l_rev));
  }

  TEST_CASE("combined-loss gradient matches central differences") {
    const auto sets = make_sets(2, 6);
    const auto cfg = small_model(sets[0].feature_dim);
    auto params = init_params(cfg, 12);
    const std::vector<const ObservationSet*> batch{&sets[0], &sets[1]};
    for (auto variant : {LossVariant::treat, LossVariant::gt_rev, LossVariant::rev2}) {
      const auto g = batch_gradients(params, cfg, batch, variant, 0.7);
      double worst = 0;
      auto& entries = params.entries();
      for (std::size_t e = 0; e < entries.size(); ++e) {
        for (std::size_t i = 0; i < entries[e].value.size(); i += 3) {
          const double h = 1e-5, orig = entries[e].value.data[i];
          entries[e].value.data[i] = orig + h;
          const double fp = batch_gradients(params, cfg, batch, variant, 0.7).total;
          entries[e].value.data[i] = orig - h;
          const double fm = batch_gradients(params, cfg, batch, variant, 0.7).total;
          entries[e].value.data[i] = orig;
          const double fd = (fp - fm) / (2 * h);
          const double an = g.grads[e].data[i];
          worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
        }
      }
      CAPTURE(to_string(variant));
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("training is deterministic and reduces the loss") {
    auto sets = make_sets(12, 8, 1);
    auto [tr, va] = split_validation(std::move(sets), 0.25);
    TrainingConfig cfg;
    cfg.model = small_model(tr[0].feature_dim);
    cfg.model.scheme = Scheme::euler;
    cfg.epochs = 8;
    cfg.batch_size = 3;
    cfg.lr = 5e-3;
    cfg.patience = 0;
    const auto a = train(tr, va, cfg);
    const auto b = train(tr, va, cfg);
    REQUIRE(a.history.size() == 8);
    CHECK(a.params == b.params);
    for (std::size_t e = 0; e < 8; ++e) CHECK(a.history[e].total == b.history[e].total);
    CHECK(a.history.back().l_pred < a.history.front().l_pred);
    CHECK(a.best_val_mse <= a.history.front().val_mse);
    cfg.seed = 2;
    CHECK_FALSE(train(tr, va, cfg).params == a.params);
  }

  TEST_CASE("early stopping restores the best epoch") {
    auto sets = make_sets(8, 8, 1);
    auto [tr, va] = split_validation(std::move(sets), 0.25);
    TrainingConfig cfg;
    cfg.model = small_model(tr[0].feature_dim);
    cfg.epochs = 30;
    cfg.patience = 2;
    cfg.lr = 0.05;
    const auto r = train(tr, va, cfg);
    double best = r.history.front().val_mse;
    for (const auto& h : r.history) best = std::min(best, h.val_mse);
    CHECK(r.best_val_mse == best);
    CHECK(r.history.size() <= r.best_epoch + 2);
    CHECK(evaluate(r.params, cfg.model, va).mse == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("training config json is strict and validated") {
    TrainingConfig cfg;
    cfg.alpha = 0.25;
    cfg.variant = LossVariant::rev2;
    auto j = nlohmann::json::parse(to_json(cfg).dump());
    const auto back = training_config_from_json(j);
    CHECK(back.alpha == 0.25);
    CHECK(back.variant == LossVariant::rev2);
    j["momentum"] = 0.9;
    CHECK_THROWS_AS(training_config_from_json(j), ConfigError);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainingConfig{};
    cfg.variant = LossVariant::none;
    CHECK(cfg.effective_alpha() == 0.0);
  }

  TEST_CASE("alpha search keeps the lowest validation error") {
    auto sets = make_sets(8, 9, 1);
    auto [tr, va] = split_validation(std::move(sets), 0.25);
    TrainingConfig cfg;
    cfg.model = small_model(tr[0].feature_dim);
    cfg.epochs = 2;
    const auto s = tune_alpha(tr, va, cfg, {0.1, 1.0});
    REQUIRE(s.val_mse.size() == 2);
    const double best = std::min(s.val_mse[0].second, s.val_mse[1].second);
    CHECK(s.best.best_val_mse == best);
    CHECK((s.best_alpha == 0.1 || s.best_alpha == 1.0));
  }
}
