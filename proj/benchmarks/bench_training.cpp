#include <benchmark/benchmark.h>

#include "treat/training.hpp"

using namespace treat;

namespace {

std::vector<ObservationSet> desk_sets(std::size_t n) {
  DatasetConfig dc;
  dc.n_train = n;
  dc.seed = 1;
  return observation_sets(generate_dataset(dc), "train");
}

void BM_BatchGradient(benchmark::State& state) {
  const auto variant = static_cast<LossVariant>(state.range(0));
  const auto sets = desk_sets(16);
  ModelConfig cfg;
  cfg.input_dim = cfg.output_dim = sets[0].feature_dim;
  cfg.scheme = Scheme::euler;
  const auto params = init_params(cfg, 1);
  std::vector<const ObservationSet*> batch;
  for (const auto& s : sets) batch.push_back(&s);
  for (auto _ : state) {
    auto g = batch_gradients(params, cfg, batch, variant, 0.5);
    benchmark::DoNotOptimize(g.total);
  }
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_BatchGradient)
    ->Arg(static_cast<int>(LossVariant::none))
    ->Arg(static_cast<int>(LossVariant::treat))
    ->Arg(static_cast<int>(LossVariant::rev2))
    ->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto sets = desk_sets(32);
  ModelConfig cfg;
  cfg.input_dim = cfg.output_dim = sets[0].feature_dim;
  const auto params = init_params(cfg, 1);
  for (auto _ : state) {
    auto r = evaluate(params, cfg, sets, {20});
    benchmark::DoNotOptimize(r.mse);
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
