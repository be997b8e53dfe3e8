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

// Edge scores over {root} ∪ sentences and exact marginals of the Gibbs
// distribution over arborescences rooted at node 0, via the directed
// Matrix-Tree theorem: Z(F) = det L0(F), a_ij = ∂ log Z / ∂ f_ij.

#ifndef STRSUM_STRUCTATTN_HPP
#define STRSUM_STRUCTATTN_HPP

#include "strsum/numkit/matrix.hpp"
#include "strsum/numkit/tape.hpp"
#include "strsum/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

namespace strsum::structattn {

class SingularLaplacian : public numkit::SingularMatrix {
 public:
  using numkit::SingularMatrix::SingularMatrix;
};

class TooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kRootFloor = 1e-30;
inline constexpr std::size_t kMaxEnumeration = 8;

/// (n+1)×(n+1) non-negative weights; f(i, j) is the weight of parent i -> child j.
struct EdgeScores {
  Matrix f;
  std::size_t n() const { return f.rows() - 1; }
};

/// (n+1)×(n+1) edge marginals; column j ≥ 1 is a distribution over parents.
struct Marginals {
  Matrix a;
  std::size_t n() const { return a.rows() - 1; }
};

/// Largest constraint violations seen on any marginal matrix in this process.
class MarginalAudit {
 public:
  static MarginalAudit& global() {
    static MarginalAudit audit;
    return audit;
  }

  void record(const Matrix& a) {
    const std::size_t n = a.rows() - 1;
    double col_err = 0.0, total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i <= n; ++i) s += a(i, j);
      total += s;
      col_err = std::max(col_err, std::abs(s - 1.0));
    }
    const double total_err = std::abs(total - static_cast<double>(n));
    std::lock_guard lock(mu_);
    ++count_;
    worst_column_ = std::max(worst_column_, col_err);
    worst_total_ = std::max(worst_total_, total_err);
  }

  std::size_t count() const {
    std::lock_guard lock(mu_);
    return count_;
  }
  double worst_column_error() const {
    std::lock_guard lock(mu_);
    return worst_column_;
  }
  double worst_total_error() const {
    std::lock_guard lock(mu_);
    return worst_total_;
  }

 private:
  mutable std::mutex mu_;
  std::size_t count_ = 0;
  double worst_column_ = 0.0;
  double worst_total_ = 0.0;
};

// ---------------------------------------------------------------------------
// Value-level kernels shared by the plain and the differentiable paths.

namespace detail {

/// Valid parent/child slots: child j ≥ 1, parent i ≠ j.
inline bool is_edge(std::size_t i, std::size_t j) { return j >= 1 && i != j; }

/// Exponentiates logits after subtracting each child column's max; floors the
/// root row at kRootFloor. `floored(0, j)` is set where the floor applied.
inline Matrix weights_from_logits(const Matrix& logits, std::vector<bool>* floored = nullptr) {
  const std::size_t size = logits.rows();
  Matrix f(size, size);
  if (floored) floored->assign(size, false);
  for (std::size_t j = 1; j < size; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size; ++i)
      if (is_edge(i, j)) mx = std::max(mx, logits(i, j));
    for (std::size_t i = 0; i < size; ++i) {
      if (!is_edge(i, j)) continue;
      f(i, j) = std::exp(logits(i, j) - mx);
    }
    if (f(0, j) < kRootFloor) {
      f(0, j) = kRootFloor;
      if (floored) (*floored)[j] = true;
    }
  }
  return f;
}

inline Matrix laplacian_minor(const Matrix& f) {
  const std::size_t n = f.rows() - 1;
  Matrix l0(n, n);
  for (std::size_t j = 1; j <= n; ++j) {
    double in = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      if (i != j) in += f(i, j);
    l0(j - 1, j - 1) = in;
    for (std::size_t i = 1; i <= n; ++i)
      if (i != j) l0(i - 1, j - 1) = -f(i, j);
  }
  return l0;
}

/// a_0j = f_0j [L0⁻¹]_jj,  a_ij = f_ij ([L0⁻¹]_jj − [L0⁻¹]_ji)
inline Matrix marginals_from_inverse(const Matrix& f, const Matrix& inv) {
  const std::size_t n = f.rows() - 1;
  Matrix a(n + 1, n + 1);
  for (std::size_t j = 1; j <= n; ++j) {
    const double jj = inv(j - 1, j - 1);
    a(0, j) = f(0, j) * jj;
    for (std::size_t i = 1; i <= n; ++i)
      if (i != j) a(i, j) = f(i, j) * (jj - inv(j - 1, i - 1));
  }
  return a;
}

inline void require_scores(const Matrix& f) {
  if (f.rows() != f.cols() || f.rows() < 2) throw numkit::ShapeMismatch("edge scores must be (n+1)x(n+1) with n >= 1");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain (non-differentiable) operations.

inline double log_partition(const EdgeScores& scores) {
  detail::require_scores(scores.f);
  try {
    return numkit::LuDecomposition(detail::laplacian_minor(scores.f)).log_abs_det();
  } catch (const numkit::SingularMatrix& e) {
    throw SingularLaplacian(std::string("log_partition: ") + e.what());
  }
}

inline Marginals tree_marginals(const EdgeScores& scores) {
  detail::require_scores(scores.f);
  Matrix inv;
  try {
    inv = numkit::LuDecomposition(detail::laplacian_minor(scores.f)).inverse();
  } catch (const numkit::SingularMatrix& e) {
    throw SingularLaplacian(std::string("tree_marginals: ") + e.what());
  }
  Marginals m{detail::marginals_from_inverse(scores.f, inv)};
  MarginalAudit::global().record(m.a);
  return m;
}

struct Enumeration {
  double z = 0.0;
  Marginals marginals;
  std::size_t tree_count = 0;
};

/// Calls visit(parent) for every arborescence rooted at 0; parent[j-1] is the
/// parent of node j.
template <typename Visit>
void for_each_arborescence(std::size_t n, Visit&& visit) {
  std::vector<std::size_t> parent(n, 0);
  auto acyclic = [&]() {
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t cur = j;
      for (std::size_t steps = 0; cur != 0; ++steps) {
        if (steps > n) return false;
        cur = parent[cur - 1];
      }
    }
    return true;
  };
  while (true) {
    bool self = false;
    for (std::size_t j = 1; j <= n; ++j) self = self || parent[j - 1] == j;
    if (!self && acyclic()) visit(static_cast<const std::vector<std::size_t>&>(parent));
    std::size_t k = 0;
    while (k < n && ++parent[k] > n) parent[k++] = 0;
    if (k == n) break;
  }
}

/// Brute-force Z and marginals by summing over every arborescence.
inline Enumeration enumerate_arborescences(const EdgeScores& scores) {
  detail::require_scores(scores.f);
  const std::size_t n = scores.n();
  if (n > kMaxEnumeration) throw TooLarge("enumerate_arborescences: n = " + std::to_string(n) + " > 8");
  Enumeration out;
  Matrix mass(n + 1, n + 1);
  for_each_arborescence(n, [&](const std::vector<std::size_t>& parent) {
    double w = 1.0;
    for (std::size_t j = 1; j <= n; ++j) w *= scores.f(parent[j - 1], j);
    out.z += w;
    ++out.tree_count;
    for (std::size_t j = 1; j <= n; ++j) mass(parent[j - 1], j) += w;
  });
  out.marginals.a = numkit::scaled(mass, 1.0 / out.z);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable operations.

/// Row 0 holds the root logits (n×1 input, transposed); rows 1..n hold the
/// n×n pairwise logits shifted one column right. Column 0 stays zero.
inline Var assemble_logits(Var root, Var pair) {
  const std::size_t n = pair.rows();
  Matrix out(n + 1, n + 1);
  for (std::size_t j = 0; j < n; ++j) out(0, j + 1) = root.value()(j, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i + 1, j + 1) = pair.value()(i, j);
  return root.tape->record("assemble_logits", std::move(out), {root, pair}, [root, pair, n](Tape& tp, const Matrix& g) {
    Matrix gr(n, 1), gp(n, n);
    for (std::size_t j = 0; j < n; ++j) gr(j, 0) = g(0, j + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) gp(i, j) = g(i + 1, j + 1);
    tp.accumulate(root, gr);
    tp.accumulate(pair, gp);
  });
}

/// Edge weights from logits (see detail::weights_from_logits). The shift is
/// differentiated too: its gradient lands on the column's argmax logit.
inline Var edge_weights(Var logits) {
  std::vector<bool> floored;
  Matrix f = detail::weights_from_logits(logits.value(), &floored);
  Tape& t = *logits.tape;
  const Var self{&t, t.size()};
  return t.record("edge_weights", std::move(f), {logits},
                  [logits, self, floored = std::move(floored)](Tape& tp, const Matrix& g) {
                    const Matrix& fv = self.value();
                    const Matrix& lv = logits.value();
                    Matrix d(g.rows(), g.cols());
                    for (std::size_t j = 1; j < g.cols(); ++j) {
                      std::size_t arg = 0;
                      double mx = -std::numeric_limits<double>::infinity(), through = 0.0;
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                        if (!detail::is_edge(i, j)) continue;
                        if (lv(i, j) > mx) mx = lv(i, j), arg = i;
                        if (i == 0 && floored[j]) continue;
                        d(i, j) = g(i, j) * fv(i, j);
                        through += d(i, j);
                      }
                      d(arg, j) -= through;
                    }
                    tp.accumulate(logits, d);
                  });
}

inline Var laplacian_minor(Var f) {
  const std::size_t n = f.rows() - 1;
  return f.tape->record("laplacian_minor", detail::laplacian_minor(f.value()), {f}, [f, n](Tape& tp, const Matrix& g) {
    Matrix d(n + 1, n + 1);
    for (std::size_t j = 1; j <= n; ++j) {
      const double diag = g(j - 1, j - 1);
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == j) continue;
        d(i, j) += diag;
        if (i >= 1) d(i, j) -= g(i - 1, j - 1);
      }
    }
    tp.accumulate(f, d);
  });
}

inline Var marginals_from_inverse(Var f, Var inv) {
  const std::size_t n = f.rows() - 1;
  Matrix a = detail::marginals_from_inverse(f.value(), inv.value());
  MarginalAudit::global().record(a);
  return f.tape->record("marginals", std::move(a), {f, inv}, [f, inv, n](Tape& tp, const Matrix& g) {
    const Matrix& fv = f.value();
    const Matrix& iv = inv.value();
    Matrix df(n + 1, n + 1), dinv(n, n);
    for (std::size_t j = 1; j <= n; ++j) {
      const double jj = iv(j - 1, j - 1);
      df(0, j) += g(0, j) * jj;
      dinv(j - 1, j - 1) += g(0, j) * fv(0, j);
      for (std::size_t i = 1; i <= n; ++i) {
        if (i == j) continue;
        df(i, j) += g(i, j) * (jj - iv(j - 1, i - 1));
        dinv(j - 1, j - 1) += g(i, j) * fv(i, j);
        dinv(j - 1, i - 1) -= g(i, j) * fv(i, j);
      }
    }
    tp.accumulate(f, df);
    tp.accumulate(inv, dinv);
  });
}

inline Var tree_marginals(Var f) {
  try {
    return marginals_from_inverse(f, numkit::inverse(laplacian_minor(f)));
  } catch (const numkit::SingularMatrix& e) {
    throw SingularLaplacian(std::string("tree_marginals: ") + e.what());
  }
}

inline Var log_partition(Var f) {
  try {
    return numkit::logdet(laplacian_minor(f));
  } catch (const numkit::SingularMatrix& e) {
    throw SingularLaplacian(std::string("log_partition: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scoring layer.

/// f_0j = exp(w_r·s_j), f_ij = exp(p_i W_f c_jᵀ) with
/// p_i = tanh(s_i W_p + b_p), c_j = tanh(s_j W_c + b_c) (structure vectors as rows).
struct StructureLayers {
  std::size_t root = 0;      // w_r, d_f × 1
  std::size_t bilinear = 0;  // W_f, d_f × d_f
  std::size_t parent_w = 0, parent_b = 0;
  std::size_t child_w = 0, child_b = 0;

  static StructureLayers create(ParamStore& store, std::size_t d_f, numkit::Rng& rng, double bound = 0.08) {
    StructureLayers s;
    s.root = store.add("structure.w_r", uniform_matrix(d_f, 1, bound, rng));
    s.bilinear = store.add("structure.W_f", uniform_matrix(d_f, d_f, bound, rng));
    s.parent_w = store.add("structure.W_p", uniform_matrix(d_f, d_f, bound, rng));
    s.parent_b = store.add("structure.b_p", Matrix(1, d_f));
    s.child_w = store.add("structure.W_c", uniform_matrix(d_f, d_f, bound, rng));
    s.child_b = store.add("structure.b_c", Matrix(1, d_f));
    return s;
  }

  /// (n+1)×(n+1) logits; row 0 root, diagonal and column 0 unused.
  Var logits(Binding& p, Var structure) const {
    using namespace numkit;
    Var parents = numkit::tanh(add_bias(matmul(structure, p(parent_w)), p(parent_b)));
    Var children = numkit::tanh(add_bias(matmul(structure, p(child_w)), p(child_b)));
    Var pair = matmul(matmul(parents, p(bilinear)), transpose(children));
    return assemble_logits(matmul(structure, p(root)), pair);
  }

  Var scores(Binding& p, Var structure) const { return edge_weights(logits(p, structure)); }
};

/// Edge scores for n structure vectors (rows of `structure`).
inline EdgeScores score_matrix(const Matrix& structure, const ParamStore& store, const StructureLayers& layers) {
  if (structure.rows() < 1) throw numkit::ShapeMismatch("score_matrix: need n >= 1");
  Tape tape(false);
  Binding p(tape, store);
  return {layers.scores(p, tape.constant(structure)).value()};
}

}  // namespace strsum::structattn

#endif  // STRSUM_STRUCTATTN_HPP
