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

#ifndef STRSUM_DISCOURSE_HPP
#define STRSUM_DISCOURSE_HPP

#include "strsum/numkit/matrix.hpp"
#include "strsum/structattn.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace strsum::discourse {

using numkit::Matrix;
using structattn::Marginals;

class AllZeroRootMass : public std::domain_error {
 public:
  AllZeroRootMass() : std::domain_error("rerank_root: every reweighted root edge is zero") {}
};

/// Importance r_0..r_n of root and sentences; sums to one.
struct RankVector {
  std::vector<double> r;
};

/// parent[j-1] is the parent of sentence j (0 = root).
struct DiscourseTree {
  std::vector<std::size_t> parent;

  std::size_t n() const { return parent.size(); }
  bool operator==(const DiscourseTree&) const = default;
};

/// Column-stochastic Â: â_00 = 0, â_i0 = 1/n for i ≥ 1, â_ij = a_ij for j ≥ 1.
inline Matrix build_stochastic(const Marginals& m) {
  const std::size_t n = m.n();
  Matrix hat = m.a;
  hat(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i) hat(i, 0) = 1.0 / static_cast<double>(n);
  return hat;
}

/// Fixed point of r = λ Â r + (1-λ) v with v uniform, solved directly as
/// r = (1-λ)(I - λÂ)⁻¹ v.
inline RankVector discourse_rank(const Matrix& hat, double damping) {
  if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("discourse_rank: damping must be in [0, 1)");
  const std::size_t size = hat.rows();
  Matrix system = Matrix::identity(size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) system(i, j) -= damping * hat(i, j);
  Matrix rhs(size, 1, (1.0 - damping) / static_cast<double>(size));
  Matrix r;
  try {
    r = numkit::LuDecomposition(system).solve(rhs);
  } catch (const numkit::SingularMatrix&) {
    // I - λÂ is strictly diagonally dominant by columns for λ < 1.
    throw std::logic_error("discourse_rank: singular system for a column-stochastic matrix");
  }
  return {std::vector<double>(r.data().begin(), r.data().end())};
}

/// ā_0j = a_0j r_j rescaled so that Σ_j ā_0j = Σ_j a_0j.
inline std::vector<double> rerank_root(const Marginals& m, const RankVector& rank) {
  const std::size_t n = m.n();
  if (rank.r.size() != n + 1) throw numkit::ShapeMismatch("rerank_root: rank vector length");
  std::vector<double> out(n + 1, 0.0);
  double mass = 0.0, weighted = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    out[j] = m.a(0, j) * rank.r[j];
    mass += m.a(0, j);
    weighted += out[j];
  }
  if (!(weighted > 0.0)) throw AllZeroRootMass();
  for (std::size_t j = 1; j <= n; ++j) out[j] *= mass / weighted;
  return out;
}

enum class TreeObjective { kLogProduct, kSum };

namespace detail {

constexpr double kNoEdge = -std::numeric_limits<double>::infinity();

/// Chu–Liu–Edmonds on a dense weight matrix w[u][v] (edge u -> v). Returns
/// parent[v] for every v (parent[root] = root).
inline std::vector<std::size_t> chu_liu_edmonds(const std::vector<std::vector<double>>& w, std::size_t root) {
  const std::size_t size = w.size();
  std::vector<std::size_t> parent(size, root);
  for (std::size_t v = 0; v < size; ++v) {
    if (v == root) continue;
    double best = kNoEdge;
    for (std::size_t u = 0; u < size; ++u) {
      if (u == v) continue;
      if (w[u][v] > best) {
        best = w[u][v];
        parent[v] = u;
      }
    }
    if (best == kNoEdge) throw std::invalid_argument("chu_liu_edmonds: node without incoming edge");
  }

  // Find one cycle among the greedy choices.
  std::vector<int> mark(size, -1);
  std::vector<bool> in_cycle(size, false);
  bool found = false;
  for (std::size_t s = 0; s < size && !found; ++s) {
    std::size_t v = s;
    while (v != root && mark[v] == -1) {
      mark[v] = static_cast<int>(s);
      v = parent[v];
    }
    if (v != root && mark[v] == static_cast<int>(s)) {
      std::size_t c = v;
      do {
        in_cycle[c] = true;
        c = parent[c];
      } while (c != v);
      found = true;
    }
  }
  if (!found) return parent;

  // Contract the cycle into node `c` of the reduced graph.
  std::vector<std::size_t> to_new(size, 0), to_old;
  for (std::size_t v = 0; v < size; ++v) {
    if (in_cycle[v]) continue;
    to_new[v] = to_old.size();
    to_old.push_back(v);
  }
  const std::size_t c = to_old.size();
  const std::size_t reduced = c + 1;
  std::vector<std::vector<double>> w2(reduced, std::vector<double>(reduced, kNoEdge));
  std::vector<std::size_t> enter_at(reduced, 0), leave_from(reduced, 0);
  for (std::size_t u = 0; u < size; ++u) {
    if (in_cycle[u]) continue;
    for (std::size_t v = 0; v < size; ++v) {
      if (u == v) continue;
      if (!in_cycle[v]) {
        w2[to_new[u]][to_new[v]] = w[u][v];
      } else {
        const double gain = w[u][v] - w[parent[v]][v];
        if (w[u][v] != kNoEdge && gain > w2[to_new[u]][c]) {
          w2[to_new[u]][c] = gain;
          enter_at[to_new[u]] = v;
        }
      }
    }
  }
  for (std::size_t v = 0; v < size; ++v) {
    if (in_cycle[v]) continue;
    for (std::size_t u = 0; u < size; ++u) {
      if (!in_cycle[u]) continue;
      if (w[u][v] > w2[c][to_new[v]]) {
        w2[c][to_new[v]] = w[u][v];
        leave_from[to_new[v]] = u;
      }
    }
  }

  const auto p2 = chu_liu_edmonds(w2, to_new[root]);
  std::vector<std::size_t> result = parent;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t v = to_old[k];
    if (v == root) continue;
    result[v] = p2[k] == c ? leave_from[k] : to_old[p2[k]];
  }
  const std::size_t entering = p2[c];
  result[enter_at[entering]] = to_old[entering];
  return result;
}

}  // namespace detail

inline double edge_weight(double a, TreeObjective objective) {
  return objective == TreeObjective::kSum ? a : std::log(std::max(a, 1e-300));
}

/// Maximum-weight arborescence rooted at 0 under log a_ij (or raw a_ij for kSum).
inline DiscourseTree extract_tree(const Marginals& m, TreeObjective objective = TreeObjective::kLogProduct) {
  const std::size_t n = m.n();
  std::vector<std::vector<double>> w(n + 1, std::vector<double>(n + 1, detail::kNoEdge));
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j)
      if (i != j) w[i][j] = edge_weight(m.a(i, j), objective);
  const auto parent = detail::chu_liu_edmonds(w, 0);
  return {std::vector<std::size_t>(parent.begin() + 1, parent.end())};
}

inline double tree_weight(const DiscourseTree& t, const Marginals& m,
                          TreeObjective objective = TreeObjective::kLogProduct) {
  double s = 0.0;
  for (std::size_t j = 1; j <= t.n(); ++j) s += edge_weight(m.a(t.parent[j - 1], j), objective);
  return s;
}

/// True iff parent links are in range and every node reaches the root.
inline bool is_valid_tree(const DiscourseTree& t) {
  const std::size_t n = t.n();
  for (std::size_t j = 1; j <= n; ++j) {
    std::size_t cur = j;
    for (std::size_t steps = 0; cur != 0; ++steps) {
      if (steps > n || cur > n || t.parent[cur - 1] == cur || t.parent[cur - 1] > n) return false;
      cur = t.parent[cur - 1];
    }
  }
  return true;
}

/// No two edges cross when nodes sit in document order with the root at
/// position 0. Edges sharing an endpoint never cross; root edges count.
inline bool is_projective(const DiscourseTree& t) {
  struct Span {
    std::size_t lo, hi;
  };
  std::vector<Span> spans;
  for (std::size_t j = 1; j <= t.n(); ++j) {
    const std::size_t p = t.parent[j - 1];
    spans.push_back({std::min(p, j), std::max(p, j)});
  }
  for (std::size_t x = 0; x < spans.size(); ++x) {
    for (std::size_t y = x + 1; y < spans.size(); ++y) {
      const Span& a = spans[x];
      const Span& b = spans[y];
      if ((a.lo < b.lo && b.lo < a.hi && a.hi < b.hi) || (b.lo < a.lo && a.lo < b.hi && b.hi < a.hi)) return false;
    }
  }
  return true;
}

/// Longest root-to-node path, in edges.
inline std::size_t tree_height(const DiscourseTree& t) {
  std::size_t best = 0;
  for (std::size_t j = 1; j <= t.n(); ++j) {
    std::size_t depth = 0;
    for (std::size_t cur = j; cur != 0; cur = t.parent[cur - 1]) {
      if (++depth > t.n()) throw std::invalid_argument("tree_height: cycle in parent links");
    }
    best = std::max(best, depth);
  }
  return best;
}

struct TreeStats {
  double projective_fraction = 0.0;
  double mean_height = 0.0;
  std::size_t trees = 0;
};

inline TreeStats tree_stats(const std::vector<DiscourseTree>& trees) {
  if (trees.empty()) throw std::invalid_argument("tree_stats: no trees");
  TreeStats s;
  s.trees = trees.size();
  std::size_t projective = 0;
  double heights = 0.0;
  for (const auto& t : trees) {
    projective += is_projective(t) ? 1 : 0;
    heights += static_cast<double>(tree_height(t));
  }
  s.projective_fraction = static_cast<double>(projective) / static_cast<double>(trees.size());
  s.mean_height = heights / static_cast<double>(trees.size());
  return s;
}

inline nlohmann::json tree_json(const std::string& doc_id, const DiscourseTree& t, const RankVector& rank) {
  return {{"doc_id", doc_id}, {"parents", t.parent}, {"ranks", rank.r}};
}

/// Graphviz digraph; node k is labelled with `labels[k-1]` when given.
inline std::string tree_dot(const std::string& doc_id, const DiscourseTree& t,
                            const std::vector<std::string>& labels = {}) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  };
  std::ostringstream out;
  out << "digraph " << quote(doc_id) << " {\n";
  out << "  n0 [label=\"ROOT\", shape=box];\n";
  for (std::size_t j = 1; j <= t.n(); ++j) {
    const std::string label = j <= labels.size() ? std::to_string(j) + ": " + labels[j - 1] : std::to_string(j);
    out << "  n" << j << " [label=" << quote(label) << "];\n";
  }
  for (std::size_t j = 1; j <= t.n(); ++j) out << "  n" << t.parent[j - 1] << " -> n" << j << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace strsum::discourse

#endif  // STRSUM_DISCOURSE_HPP
