#include <doctest.h>

#include <cmath>
#include <limits>

#include "treat/objectives.hpp"

using namespace treat;
using namespace treat::ad;

namespace {

std::vector<Var> constants(Tape& tape, std::size_t n, double step) {
  std::vector<Var> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(tape.constant(Tensor({2, 3}, step * k)));
  return out;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("loss pairings against hand sums") {
    Tape tape;
    const auto fwd = constants(tape, 4, 1.0);
    const auto other = constants(tape, 4, 10.0);
    const std::size_t K = 3;
    double treat = 0, rev2 = 0, pred = 0;
    for (std::size_t k = 0; k <= K; ++k) {
      treat += 6 * std::pow(1.0 * k - 10.0 * (K - k), 2);
      rev2 += 6 * std::pow(1.0 * k - 10.0 * k, 2);
      pred += 6 * std::pow(10.0 * k - 1.0 * k, 2);
    }
    CHECK(reversal_loss_treat(fwd, other).item() == doctest::Approx(treat));
    CHECK(reversal_loss_gt_rev(fwd, other).item() == doctest::Approx(treat));
    CHECK(reversal_loss_rev2(fwd, other).item() == doctest::Approx(rev2));
    CHECK(reconstruction_loss(fwd, other).item() == doctest::Approx(pred));
    CHECK(combined_loss(2.0, 3.0, 0.5) == 3.5);
    CHECK_THROWS_AS(combined_loss(2.0, 3.0, -0.1), ConfigError);
    const std::vector<Var> short_seq(fwd.begin(), fwd.begin() + 3);
    CHECK_THROWS_AS(reversal_loss_treat(fwd, short_seq), ShapeError);
  }

  TEST_CASE("variant names") {
    for (auto v : {LossVariant::treat, LossVariant::gt_rev, LossVariant::rev2, LossVariant::none})
      CHECK(parse_loss_variant(to_string(v)) == v);
    CHECK_THROWS_AS(parse_loss_variant("trs"), ConfigError);
  }

  TEST_CASE("AdamW first step moves each weight by lr against the gradient sign") {
    ModelParams p;
    p.add("w", Tensor({1, 3}, {1.0, -2.0, 0.5}));
    AdamW opt(0.01, 0.1);
    opt.step(p, {Tensor({1, 3}, {4.0, -0.5, 1e-3})});
    const auto& w = p.get("w").data;
    CHECK(w[0] == doctest::Approx(1.0 - 0.01 * (1.0 + 0.1 * 1.0)).epsilon(1e-9));
    CHECK(w[1] == doctest::Approx(-2.0 - 0.01 * (-1.0 + 0.1 * -2.0)).epsilon(1e-9));
    CHECK(w[2] == doctest::Approx(0.5 - 0.01 * (1e-3 / (1e-3 + 1e-8) + 0.1 * 0.5)).epsilon(1e-9));
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("AdamW leaves parameters untouched on a non-finite gradient") {
    ModelParams p;
    p.add("w", Tensor({1, 2}, {1.0, 2.0}));
    const auto before = p;
    AdamW opt(0.1);
    CHECK_THROWS_AS(opt.step(p, {Tensor({1, 2}, {std::numeric_limits<double>::infinity(), 0.0})}),
                    DivergenceError);
    CHECK(p == before);
    CHECK_THROWS_AS(AdamW(0.0), ConfigError);
  }

  TEST_CASE("AdamW minimizes a quadratic") {
    ModelParams p;
    p.add("w", Tensor({1, 2}, {3.0, -4.0}));
    AdamW opt(0.05);
    for (int i = 0; i < 2000; ++i) {
      const auto& w = p.get("w").data;
      opt.step(p, {Tensor({1, 2}, {2 * (w[0] - 1.0), 2 * (w[1] + 0.5)})});
    }
    CHECK(p.get("w").data[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(p.get("w").data[1] == doctest::Approx(-0.5).epsilon(1e-3));
  }
}
