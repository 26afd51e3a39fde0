#include <benchmark/benchmark.h>

#include "treat/autodiff.hpp"
#include "treat/rng.hpp"

using namespace treat;
using namespace treat::ad;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (auto& v : t.data) v = rng.normal();
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, n, 1);
  const auto b = random_tensor(n, n, 2);
  for (auto _ : state) {
    Tape tape;
    const auto x = tape.variable(a);
    const auto y = tape.variable(b);
    tape.backward(sum(ad::tanh(matmul(x, y))));
    benchmark::DoNotOptimize(tape.grad(x.id).data[0]);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MatmulForwardBackward)->RangeMultiplier(2)->Range(16, 128)->Complexity();

}  // namespace
