#include "treat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace treat::ad {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape) + " and " +
                   shape_string(b.shape));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) shape_fail(op, a, b);
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(a.shape));
  }
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out;
  out.shape = a.shape;
  out.data.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out.data[k] = f(a.data[k]);
  return out;
}

// C = A * B for row-major A (r x k), B (k x c).
void gemm(const double* a, const double* b, double* c, std::size_t r, std::size_t k,
          std::size_t n) {
  std::fill(c, c + r * n, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A^T * B for A (k x r), B (k x n).
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t r,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * r;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < r; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// C += A * B^T for A (r x n), B (k x n).
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t r, std::size_t n,
                 std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      c[i * k + p] += s;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> s, double fill)
    : shape(std::move(s)), data(product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != product(shape)) {
    throw ShapeError("Tensor: shape " + shape_string(shape) + " needs " +
                     std::to_string(product(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const noexcept { return shape.size() == 2 ? shape[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  if (shape.size() == 2) return shape[1];
  if (shape.size() == 1) return shape[0];
  return data.size();
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (data.size() != 1) throw ShapeError("item(): tensor " + shape_string(shape) + " is not scalar");
  return data[0];
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) s += ", ";
    s += std::to_string(shape[k]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{"variable", std::move(value), {}, {}, {}, true});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> parents,
                 BackwardFn backward) {
  bool needs = false;
  for (std::size_t p : parents) {
    if (p >= nodes_.size()) throw ShapeError(std::string(op) + ": parent id out of range");
    needs = needs || nodes_[p].requires_grad;
  }
  Node node{op, std::move(value), {}, std::move(parents), {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.data.empty() && !n.value.data.empty()) {
    throw ShapeError("no gradient recorded for node " + std::to_string(id) + " (" + n.op + ")");
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.size() != n.value.size()) {
    throw ShapeError(std::string("gradient for ") + n.op + " has shape " + shape_string(g.shape) +
                     ", value has " + shape_string(n.value.shape));
  }
  if (n.grad.data.empty()) {
    n.grad.shape = n.value.shape;
    n.grad.data = g.data;
    return;
  }
  for (std::size_t k = 0; k < g.size(); ++k) n.grad.data[k] += g.data[k];
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ShapeError("backward: variable belongs to another tape");
  const Tensor& v = nodes_.at(loss.id).value;
  if (v.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(v.shape));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Tensor(v.shape, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.data.empty()) continue;
    for (std::size_t p : n.parents) {
      if (p >= i) throw ShapeError("tape cycle: node " + std::to_string(i) + " has a later parent");
    }
    n.backward(*this, n.grad, n.value);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += b.value().data[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= b.value().data[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate(ib, map(g, [](double x) { return -x; }));
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& va = t.value(ia);
    const Tensor& vb = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor ga = g;
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] *= vb.data[k];
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb = g;
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] *= va.data[k];
      t.accumulate(ib, gb);
    }
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  require_matrix("matmul", va);
  require_matrix("matmul", vb);
  if (va.shape[1] != vb.shape[0]) shape_fail("matmul", va, vb);
  const std::size_t r = va.shape[0], k = va.shape[1], c = vb.shape[1];
  Tensor out({r, c});
  gemm(va.data.data(), vb.data.data(), out.data.data(), r, k, c);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("matmul", std::move(out), {ia, ib},
                        [ia, ib, r, k, c](Tape& t, const Tensor& g, const Tensor&) {
                          if (t.requires_grad(ia)) {
                            Tensor ga({r, k});
                            gemm_nt_acc(g.data.data(), t.value(ib).data.data(), ga.data.data(), r,
                                        c, k);
                            t.accumulate(ia, ga);
                          }
                          if (t.requires_grad(ib)) {
                            Tensor gb({k, c});
                            gemm_tn_acc(t.value(ia).data.data(), g.data.data(), gb.data.data(), r,
                                        k, c);
                            t.accumulate(ib, gb);
                          }
                        });
}

Var transpose(Var a) {
  const Tensor& va = a.value();
  require_matrix("transpose", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = va.at(i, j);
  }
  const std::size_t ia = a.id;
  return a.tape->record("transpose", std::move(out), {ia}, [ia, r, c](Tape& t, const Tensor& g, const Tensor&) {
    Tensor ga({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga.at(i, j) = g.data[j * r + i];
    }
    t.accumulate(ia, ga);
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const std::size_t ia = a.id;
  return a.tape->record("sum", Tensor::scalar(s), {ia}, [ia](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(ia, Tensor(t.value(ia).shape, g.data[0]));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  const Tensor& va = a.value();
  require_matrix("sum_cols", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += va.at(i, j);
    out.data[i] = s;
  }
  const std::size_t ia = a.id;
  return a.tape->record("sum_cols", std::move(out), {ia}, [ia, r, c](Tape& t, const Tensor& g, const Tensor&) {
    Tensor ga({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga.at(i, j) = g.data[i];
    }
    t.accumulate(ia, ga);
  });
}

Var mean_rows(Var a) {
  const Tensor& va = a.value();
  require_matrix("mean_rows", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  if (r == 0) throw ShapeError("mean_rows: no rows");
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[j] += va.at(i, j);
  }
  const double inv = 1.0 / static_cast<double>(r);
  for (double& v : out.data) v *= inv;
  const std::size_t ia = a.id;
  return a.tape->record("mean_rows", std::move(out), {ia},
                        [ia, r, c, inv](Tape& t, const Tensor& g, const Tensor&) {
                          Tensor ga({r, c});
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < c; ++j) ga.at(i, j) = g.data[j] * inv;
                          }
                          t.accumulate(ia, ga);
                        });
}

Var scale(Var a, double s) {
  Tensor out = map(a.value(), [s](double x) { return s * x; });
  const std::size_t ia = a.id;
  return a.tape->record("scale", std::move(out), {ia}, [ia, s](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(ia, map(g, [s](double x) { return s * x; }));
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = map(a.value(), [s](double x) { return x + s; });
  const std::size_t ia = a.id;
  return a.tape->record("add_scalar", std::move(out), {ia},
                        [ia](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(ia, g); });
}

Var mul_scalar(Var a, Var s) {
  if (s.value().size() != 1) {
    throw ShapeError("mul_scalar: second operand must hold one value, got " +
                     shape_string(s.value().shape));
  }
  const double sv = s.value().data[0];
  Tensor out = map(a.value(), [sv](double x) { return sv * x; });
  const std::size_t ia = a.id, is = s.id;
  return a.tape->record("mul_scalar", std::move(out), {ia, is}, [ia, is](Tape& t, const Tensor& g, const Tensor&) {
    const double sv2 = t.value(is).data[0];
    if (t.requires_grad(ia)) t.accumulate(ia, map(g, [sv2](double x) { return sv2 * x; }));
    if (t.requires_grad(is)) {
      const Tensor& va = t.value(ia);
      double d = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) d += g.data[k] * va.data[k];
      Tensor gs(t.value(is).shape, d);
      t.accumulate(is, gs);
    }
  });
}

Var add_row(Var a, Var row) {
  const Tensor& va = a.value();
  const Tensor& vr = row.value();
  require_matrix("add_row", va);
  if (vr.rows() != 1 || vr.cols() != va.shape[1] || vr.size() != va.shape[1]) {
    shape_fail("add_row", va, vr);
  }
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out = va;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += vr.data[j];
  }
  const std::size_t ia = a.id, ir = row.id;
  return a.tape->record("add_row", std::move(out), {ia, ir}, [ia, ir, r, c](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) {
      Tensor gr(t.value(ir).shape);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gr.data[j] += g.data[i * c + j];
      }
      t.accumulate(ir, gr);
    }
  });
}

Var mul_col(Var a, Var col) {
  const Tensor& va = a.value();
  const Tensor& vc = col.value();
  require_matrix("mul_col", va);
  require_matrix("mul_col", vc);
  if (vc.shape[0] != va.shape[0] || vc.shape[1] != 1) shape_fail("mul_col", va, vc);
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out = va;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= vc.data[i];
  }
  const std::size_t ia = a.id, ic = col.id;
  return a.tape->record("mul_col", std::move(out), {ia, ic}, [ia, ic, r, c](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& va2 = t.value(ia);
    const Tensor& vc2 = t.value(ic);
    if (t.requires_grad(ia)) {
      Tensor ga = g;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga.data[i * c + j] *= vc2.data[i];
      }
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ic)) {
      Tensor gc({r, 1});
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g.data[i * c + j] * va2.data[i * c + j];
        gc.data[i] = s;
      }
      t.accumulate(ic, gc);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_cols", p.value());
    if (p.value().shape[0] != r) shape_fail("concat_cols", parts[0].value(), p.value());
    widths.push_back(p.value().shape[1]);
    ids.push_back(p.id);
    total += p.value().shape[1];
  }
  Tensor out({r, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(i * widths[k]), widths[k],
                  out.data.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offset += widths[k];
  }
  auto parents = ids;
  return parts[0].tape->record(
      "concat_cols", std::move(out), std::move(parents),
      [ids, widths, r, total](Tape& t, const Tensor& g, const Tensor&) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            Tensor gk({r, widths[k]});
            for (std::size_t i = 0; i < r; ++i) {
              std::copy_n(g.data.begin() + static_cast<std::ptrdiff_t>(i * total + off),
                          widths[k],
                          gk.data.begin() + static_cast<std::ptrdiff_t>(i * widths[k]));
            }
            t.accumulate(ids[k], gk);
          }
          off += widths[k];
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> heights;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_rows", p.value());
    if (p.value().shape[1] != c) shape_fail("concat_rows", parts[0].value(), p.value());
    heights.push_back(p.value().shape[0]);
    ids.push_back(p.id);
    total += p.value().shape[0];
  }
  Tensor out({total, c});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(offset * c));
    offset += p.value().shape[0];
  }
  auto parents = ids;
  return parts[0].tape->record("concat_rows", std::move(out), std::move(parents),
                               [ids, heights, c](Tape& t, const Tensor& g, const Tensor&) {
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < ids.size(); ++k) {
                                   if (t.requires_grad(ids[k])) {
                                     Tensor gk({heights[k], c});
                                     std::copy_n(g.data.begin() +
                                                     static_cast<std::ptrdiff_t>(off * c),
                                                 heights[k] * c, gk.data.begin());
                                     t.accumulate(ids[k], gk);
                                   }
                                   off += heights[k];
                                 }
                               });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& va = a.value();
  require_matrix("slice_cols", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  if (begin > end || end > c) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for " + shape_string(va.shape));
  }
  const std::size_t w = end - begin;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) out.data[i * w + j] = va.data[i * c + begin + j];
  }
  const std::size_t ia = a.id;
  return a.tape->record("slice_cols", std::move(out), {ia},
                        [ia, r, c, w, begin](Tape& t, const Tensor& g, const Tensor&) {
                          Tensor ga({r, c});
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < w; ++j) {
                              ga.data[i * c + begin + j] = g.data[i * w + j];
                            }
                          }
                          t.accumulate(ia, ga);
                        });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& va = a.value();
  require_matrix("slice_rows", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  if (begin > end || end > r) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for " + shape_string(va.shape));
  }
  Tensor out({end - begin, c});
  std::copy_n(va.data.begin() + static_cast<std::ptrdiff_t>(begin * c), (end - begin) * c,
              out.data.begin());
  const std::size_t ia = a.id;
  return a.tape->record("slice_rows", std::move(out), {ia},
                        [ia, r, c, begin](Tape& t, const Tensor& g, const Tensor&) {
                          Tensor ga({r, c});
                          std::copy(g.data.begin(), g.data.end(),
                                    ga.data.begin() + static_cast<std::ptrdiff_t>(begin * c));
                          t.accumulate(ia, ga);
                        });
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  if (product(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.value().shape) + " as " +
                     shape_string(shape));
  }
  Tensor out(shape, a.value().data);
  const std::size_t ia = a.id;
  return a.tape->record("reshape", std::move(out), {ia},
                        [ia](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(ia, g); });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Tensor& va = a.value();
  require_matrix("gather_rows", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out({index.size(), c});
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= r) throw ShapeError("gather_rows: index out of range");
    std::copy_n(va.data.begin() + static_cast<std::ptrdiff_t>(index[k] * c), c,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  const std::size_t ia = a.id;
  return a.tape->record("gather_rows", std::move(out), {ia},
                        [ia, r, c, index = std::move(index)](Tape& t, const Tensor& g, const Tensor&) {
                          Tensor ga({r, c});
                          for (std::size_t k = 0; k < index.size(); ++k) {
                            for (std::size_t j = 0; j < c; ++j) {
                              ga.data[index[k] * c + j] += g.data[k * c + j];
                            }
                          }
                          t.accumulate(ia, ga);
                        });
}

Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t n_rows) {
  const Tensor& va = a.value();
  require_matrix("scatter_add_rows", va);
  const std::size_t c = va.shape[1];
  if (index.size() != va.shape[0]) {
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                     shape_string(va.shape));
  }
  Tensor out({n_rows, c});
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= n_rows) throw ShapeError("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) out.data[index[k] * c + j] += va.data[k * c + j];
  }
  const std::size_t ia = a.id;
  return a.tape->record("scatter_add_rows", std::move(out), {ia},
                        [ia, c, index = std::move(index)](Tape& t, const Tensor& g, const Tensor&) {
                          Tensor ga({index.size(), c});
                          for (std::size_t k = 0; k < index.size(); ++k) {
                            std::copy_n(g.data.begin() + static_cast<std::ptrdiff_t>(index[k] * c),
                                        c, ga.data.begin() + static_cast<std::ptrdiff_t>(k * c));
                          }
                          t.accumulate(ia, ga);
                        });
}

namespace {

// Elementwise op with derivative dfdx(x, y) given input x and output y.
template <class F, class D>
Var unary(const char* op, Var a, F f, D dfdx) {
  Tensor out = map(a.value(), f);
  const std::size_t ia = a.id;
  return a.tape->record(op, std::move(out), {ia},
                        [ia, dfdx](Tape& t, const Tensor& g, const Tensor& y) {
                          const Tensor& x = t.value(ia);
                          Tensor ga = g;
                          for (std::size_t k = 0; k < g.size(); ++k) {
                            ga.data[k] *= dfdx(x.data[k], y.data[k]);
                          }
                          t.accumulate(ia, ga);
                        });
}

}  // namespace

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a,
               [](double x) {
                 if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Var sin(Var a) {
  return unary("sin", a, [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
  return unary("cos", a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var l2_norm_sq(Var a) {
  double s = 0.0;
  for (double v : a.value().data) s += v * v;
  const std::size_t ia = a.id;
  return a.tape->record("l2_norm_sq", Tensor::scalar(s), {ia},
                        [ia](Tape& t, const Tensor& g, const Tensor&) {
                          const Tensor& x = t.value(ia);
                          Tensor ga = x;
                          for (double& v : ga.data) v *= 2.0 * g.data[0];
                          t.accumulate(ia, ga);
                        });
}

Var softmax_rows(Var a) {
  const Tensor& va = a.value();
  require_matrix("softmax_rows", va);
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) hi = std::max(hi, va.at(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(va.at(i, j) - hi);
      total += out.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= total;
  }
  const std::size_t ia = a.id;
  return a.tape->record("softmax_rows", std::move(out), {ia},
                        [ia, r, c](Tape& t, const Tensor& g, const Tensor& y) {
                          Tensor ga({r, c});
                          for (std::size_t i = 0; i < r; ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
                            for (std::size_t j = 0; j < c; ++j) {
                              ga.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
                            }
                          }
                          t.accumulate(ia, ga);
                        });
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                           const std::vector<Tensor>& params, double h, double tol, double floor) {
  if (!(h > 0.0)) throw ConfigError("grad_check: h must be positive");
  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& v : values) vars.push_back(tape.variable(v));
    return f(tape, vars).item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.variable(p));
  Var loss = f(tape, vars);
  tape.backward(loss);

  GradCheckReport report;
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double worst = 0.0;
    const Tensor& analytic = tape.grad(vars[pi].id);
    for (std::size_t k = 0; k < params[pi].size(); ++k) {
      const double orig = work[pi].data[k];
      work[pi].data[k] = orig + h;
      const double up = evaluate(work);
      work[pi].data[k] = orig - h;
      const double down = evaluate(work);
      work[pi].data[k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data.empty() ? 0.0 : analytic.data[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  report.passed = report.worst < tol;
  return report;
}

}  // namespace treat::ad
