#include <benchmark/benchmark.h>

#include "treat/physics.hpp"

using namespace treat;

namespace {

void BM_SpringIntegration(benchmark::State& state) {
  const auto scheme = static_cast<Scheme>(state.range(0));
  const auto agents = static_cast<std::size_t>(state.range(1));
  const auto spec = SystemSpec::defaults(SystemKind::simple_spring, agents);
  StateVector s0 = spec.zero_state();
  for (std::size_t i = 0; i < s0.size(); ++i) s0[i] = 0.1 * static_cast<double>(i % 7) - 0.3;
  const auto f = derivative_fn(spec);
  for (auto _ : state) {
    auto traj = integrate_subsampled(f, s0, TimeGrid(0.0, 1e-3, 1000), scheme, 100);
    benchmark::DoNotOptimize(traj.states.back()[0]);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SpringIntegration)
    ->ArgsProduct({{static_cast<int>(Scheme::euler), static_cast<int>(Scheme::rk4)}, {1, 5}});

void BM_PendulumRk4(benchmark::State& state) {
  const auto spec = SystemSpec::defaults(SystemKind::triple_pendulum);
  const StateVector s0(3, 1, 1, {1.5, 0.0, 1.2, 0.0, -0.9, 0.0});
  const auto f = derivative_fn(spec);
  for (auto _ : state) {
    auto traj = integrate_subsampled(f, s0, TimeGrid(0.0, 1e-4, 1000), Scheme::rk4, 100);
    benchmark::DoNotOptimize(traj.states.back()[0]);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_PendulumRk4);

}  // namespace
