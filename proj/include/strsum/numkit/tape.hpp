// Copyright 2026 The StrSum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode differentiation over dense matrices.
//
// Every operation appends a node holding its value and, when any input needs a
// gradient, a closure that pushes the node's gradient into its inputs. The
// backward sweep walks nodes in reverse creation order, which is a reverse
// topological order because inputs always precede outputs.

#ifndef STRSUM_NUMKIT_TAPE_HPP
#define STRSUM_NUMKIT_TAPE_HPP

#include "strsum/numkit/matrix.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace strsum::numkit {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Row-sparse gradient: row index -> gradient row.
using RowGradients = std::map<std::size_t, std::vector<double>>;

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  /// With `record` false no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value) { return push("constant", std::move(value), nullptr, false); }

  /// Differentiable leaf owning its value.
  Var leaf(Matrix value) { return push("leaf", std::move(value), nullptr, record_); }

  /// Differentiable leaf aliasing an external matrix that must outlive the tape.
  /// Row-sparse leaves collect gradients per row (see gather_rows).
  Var leaf_ref(const Matrix& value, bool row_sparse = false) {
    Node n;
    n.name = "leaf";
    n.external = &value;
    n.needs_grad = record_;
    n.row_sparse = row_sparse;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  /// Appends an operation result. `fn` runs during backward if any input needs a gradient.
  Var record(const char* name, Matrix value, std::initializer_list<Var> inputs, Backward fn) {
    bool needs = false;
    if (record_) {
      for (const Var& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    }
    return push(name, std::move(value), needs ? std::move(fn) : nullptr, needs);
  }
  Var record(const char* name, Matrix value, std::span<const Var> inputs, Backward fn) {
    bool needs = false;
    if (record_) {
      for (const Var& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    }
    return push(name, std::move(value), needs ? std::move(fn) : nullptr, needs);
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external ? *n.external : n.value;
  }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool row_sparse(Var v) const { return nodes_[v.id].row_sparse; }

  /// Dense gradient, or nullptr if nothing flowed into the node.
  const Matrix* grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.grad.empty() && value(v).size() != 0 ? nullptr : &n.grad;
  }
  const RowGradients& row_grad(Var v) const { return nodes_[v.id].rows; }

  /// grad(v) += alpha · g
  void accumulate(Var v, const Matrix& g, double alpha = 1.0) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.row_sparse) {
      for (std::size_t r = 0; r < g.rows(); ++r) accumulate_row(v, r, g.row(r), alpha);
      return;
    }
    if (n.grad.empty()) {
      const Matrix& val = value(v);
      n.grad = Matrix(val.rows(), val.cols());
    }
    axpy(n.grad, g, alpha);
  }

  /// grad(v)[row] += alpha · g
  void accumulate_row(Var v, std::size_t row, std::span<const double> g, double alpha = 1.0) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.row_sparse) {
      auto& dst = n.rows[row];
      if (dst.empty()) dst.assign(g.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += alpha * g[k];
      return;
    }
    if (n.grad.empty()) {
      const Matrix& val = value(v);
      n.grad = Matrix(val.rows(), val.cols());
    }
    auto dst = n.grad.row(row);
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += alpha * g[k];
  }

  /// Seeds d(root) = seed (root must be 1×1) and propagates to every node.
  void backward(Var root, double seed = 1.0) {
    if (!record_) throw std::logic_error("backward on a non-recording tape");
    const Matrix& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1) throw ShapeMismatch("backward: root must be 1x1");
    accumulate(root, Matrix(1, 1, seed));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    const char* name = "";
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    RowGradients rows;
    Backward backward;
    bool needs_grad = false;
    bool row_sparse = false;
  };

  Var push(const char* name, Matrix value, Backward fn, bool needs) {
    if (!all_finite(value)) throw NonFinite(std::string("non-finite value produced by ") + name);
    Node n;
    n.name = name;
    n.value = std::move(value);
    n.backward = std::move(fn);
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

// ---------------------------------------------------------------------------
// Primitive operations.

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  return t.record("matmul", numkit::matmul(a.value(), b.value()), {a, b},
                  [a, b](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(a)) tp.accumulate(a, matmul_nt(g, b.value()));
                    if (tp.needs_grad(b)) tp.accumulate(b, matmul_tn(a.value(), g));
                  });
}

/// a · bᵀ
inline Var matmul_nt(Var a, Var b) {
  return a.tape->record("matmul_nt", numkit::matmul_nt(a.value(), b.value()), {a, b},
                        [a, b](Tape& tp, const Matrix& g) {
                          if (tp.needs_grad(a)) tp.accumulate(a, numkit::matmul(g, b.value()));
                          if (tp.needs_grad(b)) tp.accumulate(b, matmul_tn(g, a.value()));
                        });
}

inline Var add(Var a, Var b) {
  return a.tape->record("add", numkit::add(a.value(), b.value()), {a, b},
                        [a, b](Tape& tp, const Matrix& g) {
                          tp.accumulate(a, g);
                          tp.accumulate(b, g);
                        });
}

inline Var sub(Var a, Var b) {
  return a.tape->record("sub", numkit::sub(a.value(), b.value()), {a, b},
                        [a, b](Tape& tp, const Matrix& g) {
                          tp.accumulate(a, g);
                          tp.accumulate(b, g, -1.0);
                        });
}

inline Var hadamard(Var a, Var b) {
  return a.tape->record("hadamard", numkit::hadamard(a.value(), b.value()), {a, b},
                        [a, b](Tape& tp, const Matrix& g) {
                          if (tp.needs_grad(a)) tp.accumulate(a, numkit::hadamard(g, b.value()));
                          if (tp.needs_grad(b)) tp.accumulate(b, numkit::hadamard(g, a.value()));
                        });
}

inline Var scale(Var a, double s) {
  return a.tape->record("scale", scaled(a.value(), s), {a},
                        [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, g, s); });
}

/// Adds the 1×c row `bias` to every row of `a`.
inline Var add_bias(Var a, Var bias) {
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) throw ShapeMismatch("add_bias: bias must be 1 x cols");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv[j];
  return a.tape->record("add_bias", std::move(out), {a, bias},
                        [a, bias](Tape& tp, const Matrix& g) {
                          tp.accumulate(a, g);
                          if (tp.needs_grad(bias)) {
                            Matrix col(1, g.cols());
                            for (std::size_t i = 0; i < g.rows(); ++i)
                              for (std::size_t j = 0; j < g.cols(); ++j) col[j] += g(i, j);
                            tp.accumulate(bias, col);
                          }
                        });
}

namespace detail {
// Elementwise op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const char* name, Var a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape;
  Matrix out = a.value();
  for (double& v : out.data()) v = fwd(v);
  const Var self{&t, t.size()};
  return t.record(name, std::move(out), {a}, [a, self, deriv](Tape& tp, const Matrix& g) {
    const Matrix& x = a.value();
    const Matrix& y = self.value();
    Matrix d(g.rows(), g.cols());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * deriv(x[i], y[i]);
    tp.accumulate(a, d);
  });
}
}  // namespace detail

inline Var tanh(Var a) {
  return detail::unary("tanh", a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var exp(Var a) {
  return detail::unary("exp", a, [](double x) { return std::exp(x); },
                       [](double, double y) { return y; });
}

inline Var log(Var a) {
  return detail::unary("log", a, [](double x) { return std::log(x); },
                       [](double x, double) { return 1.0 / x; });
}

/// 1 - a
inline Var one_minus(Var a) {
  return detail::unary("one_minus", a, [](double x) { return 1.0 - x; },
                       [](double, double) { return -1.0; });
}

inline Var sum(Var a) {
  return a.tape->record("sum", Matrix(1, 1, numkit::sum(a.value())), {a},
                        [a](Tape& tp, const Matrix& g) {
                          tp.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
                        });
}

inline Var transpose(Var a) {
  return a.tape->record("transpose", numkit::transpose(a.value()), {a},
                        [a](Tape& tp, const Matrix& g) { tp.accumulate(a, numkit::transpose(g)); });
}

inline Var concat_cols(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) throw ShapeMismatch("concat_cols: row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::copy(av.row(i).begin(), av.row(i).end(), out.row(i).begin());
    std::copy(bv.row(i).begin(), bv.row(i).end(), out.row(i).begin() + av.cols());
  }
  return a.tape->record("concat_cols", std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    const std::size_t ca = a.cols();
    const std::size_t cb = b.cols();
    Matrix ga(g.rows(), ca), gb(g.rows(), cb);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga(i, j) = g(i, j);
      for (std::size_t j = 0; j < cb; ++j) gb(i, j) = g(i, ca + j);
    }
    tp.accumulate(a, ga);
    tp.accumulate(b, gb);
  });
}

inline Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Matrix& av = a.value();
  if (start + count > av.cols()) throw ShapeMismatch("slice_cols: range out of bounds");
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, start + j);
  return a.tape->record("slice_cols", std::move(out), {a}, [a, start, count](Tape& tp, const Matrix& g) {
    Matrix full(a.rows(), a.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) full(i, start + j) = g(i, j);
    tp.accumulate(a, full);
  });
}

inline Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Matrix& av = a.value();
  if (start + count > av.rows()) throw ShapeMismatch("slice_rows: range out of bounds");
  Matrix out(count, av.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(av.row(start + i).begin(), av.row(start + i).end(), out.row(i).begin());
  return a.tape->record("slice_rows", std::move(out), {a}, [a, start, count](Tape& tp, const Matrix& g) {
    for (std::size_t i = 0; i < count; ++i) tp.accumulate_row(a, start + i, g.row(i));
  });
}

/// Row k of the result is row ids[k] of `table` (embedding lookup).
inline Var gather_rows(Var table, std::vector<std::size_t> ids) {
  const Matrix& tv = table.value();
  Matrix out(ids.size(), tv.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= tv.rows()) throw ShapeMismatch("gather_rows: id out of range");
    std::copy(tv.row(ids[k]).begin(), tv.row(ids[k]).end(), out.row(k).begin());
  }
  return table.tape->record("gather_rows", std::move(out), {table},
                            [table, ids = std::move(ids)](Tape& tp, const Matrix& g) {
                              for (std::size_t k = 0; k < ids.size(); ++k)
                                tp.accumulate_row(table, ids[k], g.row(k));
                            });
}

/// Row i is a_i where mask[i] != 0, else b_i. Masked rows pass b through untouched.
inline Var blend_rows(std::vector<double> mask, Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  detail::require_same_shape(av, bv, "blend_rows");
  if (mask.size() != av.rows()) throw ShapeMismatch("blend_rows: mask length");
  Matrix out = bv;
  for (std::size_t i = 0; i < av.rows(); ++i)
    if (mask[i] != 0.0) std::copy(av.row(i).begin(), av.row(i).end(), out.row(i).begin());
  return a.tape->record("blend_rows", std::move(out), {a, b},
                        [a, b, mask = std::move(mask)](Tape& tp, const Matrix& g) {
                          for (std::size_t i = 0; i < g.rows(); ++i) {
                            if (mask[i] != 0.0)
                              tp.accumulate_row(a, i, g.row(i));
                            else
                              tp.accumulate_row(b, i, g.row(i));
                          }
                        });
}

/// Element-wise max over time steps. steps[t] is rows×cols; valid(i, t) selects
/// the steps that take part for row i. Ties go to the lowest t; rows with no
/// valid step pool to zero.
inline Var max_pool(const std::vector<Var>& steps, const std::vector<std::vector<bool>>& valid) {
  if (steps.empty()) throw ShapeMismatch("max_pool: no steps");
  Tape& t = *steps.front().tape;
  const std::size_t rows = steps.front().rows();
  const std::size_t cols = steps.front().cols();
  Matrix out(rows, cols);
  // argmax[i * cols + m] = chosen step, or -1 when the row has no valid step.
  std::vector<long> argmax(rows * cols, -1);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t s = 0; s < steps.size(); ++s) {
      if (!valid[i][s]) continue;
      const auto r = steps[s].value().row(i);
      for (std::size_t m = 0; m < cols; ++m) {
        long& am = argmax[i * cols + m];
        if (am < 0 || r[m] > out(i, m)) {
          out(i, m) = r[m];
          am = static_cast<long>(s);
        }
      }
    }
  }
  return t.record("max_pool", std::move(out), std::span<const Var>(steps),
                  [steps, argmax = std::move(argmax), rows, cols](Tape& tp, const Matrix& g) {
                    for (std::size_t s = 0; s < steps.size(); ++s) {
                      if (!tp.needs_grad(steps[s])) continue;
                      Matrix gs(rows, cols);
                      bool any = false;
                      for (std::size_t k = 0; k < rows * cols; ++k) {
                        if (argmax[k] == static_cast<long>(s)) {
                          gs[k] = g[k];
                          any = true;
                        }
                      }
                      if (any) tp.accumulate(steps[s], gs);
                    }
                  });
}

/// Sum over rows with mask[i] != 0 of -log softmax(logits_i)[targets[i]].
inline Var nll_sum(Var logits, std::vector<std::size_t> targets, std::vector<double> mask) {
  const Matrix& lv = logits.value();
  if (targets.size() != lv.rows() || mask.size() != lv.rows()) throw ShapeMismatch("nll_sum: targets/mask length");
  Matrix probs(lv.rows(), lv.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    if (mask[i] == 0.0) continue;
    const auto r = lv.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) z += std::exp(r[k] - mx);
    const double logz = mx + std::log(z);
    for (std::size_t k = 0; k < r.size(); ++k) probs(i, k) = std::exp(r[k] - logz);
    total += logz - r[targets[i]];
  }
  return logits.tape->record(
      "nll_sum", Matrix(1, 1, total), {logits},
      [logits, targets = std::move(targets), mask = std::move(mask), probs = std::move(probs)](
          Tape& tp, const Matrix& g) {
        Matrix d(probs.rows(), probs.cols());
        for (std::size_t i = 0; i < probs.rows(); ++i) {
          if (mask[i] == 0.0) continue;
          for (std::size_t k = 0; k < probs.cols(); ++k) d(i, k) = g[0] * probs(i, k);
          d(i, targets[i]) -= g[0];
        }
        tp.accumulate(logits, d);
      });
}

/// Matrix inverse; backward dM = -M^-T · dInv · M^-T.
inline Var inverse(Var m) {
  Matrix inv = LuDecomposition(m.value()).inverse();
  Tape& t = *m.tape;
  const Var self{&t, t.size()};
  return t.record("inverse", std::move(inv), {m}, [m, self](Tape& tp, const Matrix& g) {
    const Matrix& inv_v = self.value();
    // -(inv^T g inv^T)
    tp.accumulate(m, numkit::matmul(matmul_tn(inv_v, g), numkit::transpose(inv_v)), -1.0);
  });
}

/// log|det M|; backward dM = g · M^-T.
inline Var logdet(Var m) {
  LuDecomposition lu(m.value());
  Matrix inv_t = numkit::transpose(lu.inverse());
  return m.tape->record("logdet", Matrix(1, 1, lu.log_abs_det()), {m},
                        [m, inv_t = std::move(inv_t)](Tape& tp, const Matrix& g) {
                          tp.accumulate(m, inv_t, g[0]);
                        });
}

}  // namespace strsum::numkit

#endif  // STRSUM_NUMKIT_TAPE_HPP
