#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "treat/error.hpp"

namespace treat::ad {

/// Dense row-major array of doubles. Most operations work on rank-2 tensors;
/// rank 0 is a scalar and rank 1 a plain vector.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  [[nodiscard]] std::size_t rank() const noexcept { return shape.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
  /// Rows/cols of the rank-2 view: scalars are 1x1, vectors 1xn.
  [[nodiscard]] std::size_t rows() const noexcept;
  [[nodiscard]] std::size_t cols() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  [[nodiscard]] double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const std::vector<std::size_t>& shape() const { return value().shape; }
  [[nodiscard]] std::size_t rows() const { return value().rows(); }
  [[nodiscard]] std::size_t cols() const { return value().cols(); }
  [[nodiscard]] double item() const { return value().item(); }
};

/// Append-only record of the forward computation. Every node's parents
/// precede it, so a single reverse sweep visits each node once.
///
/// A tape is confined to one thread.
class Tape {
 public:
  using BackwardFn =
      std::function<void(Tape&, const Tensor& grad_out, const Tensor& value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);
  /// Leaf without gradient.
  Var constant(Tensor value);

  /// Record an op result. `backward` receives the output adjoint and the
  /// output value and must call accumulate() for its parents. Skipped when no parent needs a
  /// gradient.
  Var record(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  [[nodiscard]] const Tensor& grad(std::size_t id) const;
  /// False when backward() never reached the node.
  [[nodiscard]] bool has_grad(std::size_t id) const { return !nodes_.at(id).grad.data.empty(); }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  [[nodiscard]] const char* op(std::size_t id) const { return nodes_.at(id).op; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Add `g` into the adjoint of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);

  /// Reverse sweep from a scalar node. Throws ShapeError if it is not scalar.
  void backward(Var loss);

  void clear();

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise binary ops require identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);

/// a (r x k) times b (k x c).
Var matmul(Var a, Var b);
Var transpose(Var a);

Var sum(Var a);
Var mean(Var a);
/// Per-row sums as an (r x 1) column.
Var sum_cols(Var a);
/// Column means over rows, (1 x c).
Var mean_rows(Var a);

/// Scalar broadcast: a * s and a + s for a constant s.
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// Multiply every entry of `a` by the 0-d/1-element variable `s`.
Var mul_scalar(Var a, Var s);

/// Add a (1 x c) row to every row of an (r x c) matrix.
Var add_row(Var a, Var row);
/// Scale row r of `a` by column entry col(r, 0).
Var mul_col(Var a, Var col);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, std::vector<std::size_t> shape);

/// out row k = a row index[k].
Var gather_rows(Var a, std::vector<std::size_t> index);
/// out row index[k] += a row k, for an output of n_rows rows.
Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t n_rows);

Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var square(Var a);
/// Sum of squares, a scalar.
Var l2_norm_sq(Var a);
/// Row-wise softmax.
Var softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

/// Result of comparing backward() gradients with central differences.
struct GradCheckReport {
  /// Max relative error per parameter, |a - n| / max(|a|, |n|, floor).
  std::vector<double> max_rel_error;
  double worst = 0.0;
  bool passed = true;
};

/// `f` builds a scalar loss on the given tape from variables holding `params`.
GradCheckReport grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                           const std::vector<Tensor>& params, double h = 1e-5, double tol = 1e-5,
                           double floor = 1e-6);

}  // namespace treat::ad
