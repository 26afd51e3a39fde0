#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "treat/autodiff.hpp"
#include "treat/rng.hpp"

using namespace treat;
using namespace treat::ad;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t({r, c});
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

using Op = std::function<Var(Tape&, const std::vector<Var>&)>;

void check_op(const std::string& name, const Op& op, std::vector<Tensor> params) {
  CAPTURE(name);
  const auto report = grad_check(op, params, 1e-5, 1e-5);
  CHECK(report.worst < 1e-5);
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("forward values") {
    Tape tape;
    const auto a = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    const auto b = tape.constant(Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}));
    CHECK(matmul(a, b).value() == Tensor::matrix(2, 2, {4, 5, 10, 11}));
    CHECK(transpose(a).value() == Tensor::matrix(3, 2, {1, 4, 2, 5, 3, 6}));
    CHECK(sum(a).item() == 21);
    CHECK(sum_cols(a).value() == Tensor::matrix(2, 1, {6, 15}));
    CHECK(mean_rows(a).value() == Tensor::matrix(1, 3, {2.5, 3.5, 4.5}));
    CHECK(gather_rows(a, {1, 1, 0}).value() ==
          Tensor::matrix(3, 3, {4, 5, 6, 4, 5, 6, 1, 2, 3}));
    CHECK(scatter_add_rows(a, {1, 1}, 3).value() ==
          Tensor::matrix(3, 3, {0, 0, 0, 5, 7, 9, 0, 0, 0}));
    const auto s = softmax_rows(a).value();
    for (std::size_t r = 0; r < 2; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 3; ++c) total += s.at(r, c);
      CHECK(total == doctest::Approx(1.0));
    }
    CHECK(s.at(0, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1) + std::exp(2) + std::exp(3))));
  }

  TEST_CASE("shape errors") {
    Tape tape;
    const auto a = tape.constant(Tensor({2, 3}));
    const auto b = tape.constant(Tensor({2, 2}));
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(tape.backward(a), ShapeError);
  }

  TEST_CASE("gradients of every op against central differences") {
    const auto A = random_tensor(3, 4, 1);
    const auto B = random_tensor(3, 4, 2);
    const auto C = random_tensor(4, 2, 3);
    const auto row = random_tensor(1, 4, 4);
    const auto col = random_tensor(3, 1, 5);
    const auto w = [](Var v) { return l2_norm_sq(v); };
    check_op("add", [&](Tape&, const auto& v) { return w(add(v[0], v[1])); }, {A, B});
    check_op("sub", [&](Tape&, const auto& v) { return w(sub(v[0], v[1])); }, {A, B});
    check_op("mul", [&](Tape&, const auto& v) { return w(mul(v[0], v[1])); }, {A, B});
    check_op("matmul", [&](Tape&, const auto& v) { return w(matmul(v[0], v[1])); }, {A, C});
    check_op("transpose", [&](Tape& t, const auto& v) {
      return sum(mul(transpose(v[0]), t.constant(random_tensor(4, 3, 6)))); }, {A});
    check_op("mean", [&](Tape&, const auto& v) { return mean(square(v[0])); }, {A});
    check_op("sum_cols", [&](Tape&, const auto& v) { return w(sum_cols(v[0])); }, {A});
    check_op("mean_rows", [&](Tape&, const auto& v) { return w(mean_rows(v[0])); }, {A});
    check_op("scale", [&](Tape&, const auto& v) { return w(add_scalar(scale(v[0], -1.7), 0.3)); }, {A});
    check_op("mul_scalar", [&](Tape&, const auto& v) {
      return w(mul_scalar(v[0], reshape(v[1], {1}))); }, {A, Tensor({1, 1}, {0.7})});
    check_op("add_row", [&](Tape&, const auto& v) { return w(add_row(v[0], v[1])); }, {A, row});
    check_op("mul_col", [&](Tape&, const auto& v) { return w(mul_col(v[0], v[1])); }, {A, col});
    check_op("concat", [&](Tape&, const auto& v) {
      return w(concat_rows({concat_cols({v[0], v[1]}), concat_cols({v[1], v[0]})})); }, {A, B});
    check_op("slice", [&](Tape&, const auto& v) {
      return w(slice_rows(slice_cols(v[0], 1, 3), 0, 2)); }, {A});
    check_op("gather_scatter", [&](Tape&, const auto& v) {
      return w(scatter_add_rows(gather_rows(v[0], {2, 0, 2, 1}), {0, 0, 1, 3}, 4)); }, {A});
    check_op("tanh", [&](Tape&, const auto& v) { return w(ad::tanh(v[0])); }, {A});
    check_op("sigmoid", [&](Tape&, const auto& v) { return w(sigmoid(v[0])); }, {A});
    check_op("sin_cos", [&](Tape&, const auto& v) { return w(ad::sin(v[0]) + ad::cos(v[1])); }, {A, B});
    check_op("exp", [&](Tape&, const auto& v) { return w(ad::exp(scale(v[0], 0.5))); }, {A});
    check_op("softmax", [&](Tape& t, const auto& v) {
      return sum(mul(softmax_rows(v[0]), t.constant(B))); }, {A});
    check_op("relu", [&](Tape&, const auto& v) { return w(relu(add_scalar(v[0], 0.01))); }, {A});
    check_op("neg", [&](Tape&, const auto& v) { return w(-v[0] + v[1] * 2.0); }, {A, B});
  }

  TEST_CASE("shared subexpressions accumulate adjoints") {
    Tape tape;
    const auto x = tape.variable(Tensor::scalar(3.0));
    const auto y = mul(x, x);
    const auto z = add(y, mul(y, x));
    tape.backward(z);
    CHECK(tape.grad(x.id).item() == doctest::Approx(2 * 3.0 + 3 * 9.0));
  }

  TEST_CASE("constants receive no gradient") {
    Tape tape;
    const auto c = tape.constant(Tensor::scalar(2.0));
    const auto x = tape.variable(Tensor::scalar(1.5));
    tape.backward(mul(c, x));
    CHECK_FALSE(tape.has_grad(c.id));
    CHECK(tape.grad(x.id).item() == doctest::Approx(2.0));
  }

  TEST_CASE("grad_check flags a wrong derivative") {
    const Op wrong = [](Tape& t, const std::vector<Var>& v) {
      const Var x = v[0];
      return t.record("bad_square", Tensor::scalar(x.item() * x.item()), {x.id},
                      [x](Tape& tp, const Tensor& g, const Tensor&) {
                        tp.accumulate(x.id, Tensor::scalar(g.item() * 3.0 * x.item()));
                      });
    };
    const auto report = grad_check(wrong, {Tensor::scalar(1.3)});
    CHECK_FALSE(report.passed);
    CHECK(report.worst == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
  }
}
