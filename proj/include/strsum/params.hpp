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

#ifndef STRSUM_PARAMS_HPP
#define STRSUM_PARAMS_HPP

#include "strsum/numkit/matrix.hpp"
#include "strsum/numkit/rng.hpp"
#include "strsum/numkit/tape.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace strsum {

using numkit::Matrix;
using numkit::Tape;
using numkit::Var;

/// Named, ordered parameter matrices. Layers refer to entries by index.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix init, bool row_sparse = false) {
    if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
    entries_.push_back({std::move(name), std::move(init), row_sparse});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_.at(i).name; }
  Matrix& value(std::size_t i) { return entries_.at(i).value; }
  const Matrix& value(std::size_t i) const { return entries_.at(i).value; }
  bool row_sparse(std::size_t i) const { return entries_.at(i).row_sparse; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  bool operator==(const ParamStore& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != o.entries_[i].name || !(entries_[i].value == o.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  struct Entry {
    std::string name;
    Matrix value;
    bool row_sparse = false;
  };
  std::vector<Entry> entries_;
};

inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, numkit::Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

/// Glorot/Xavier uniform bound for a fan_in × fan_out projection.
inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Gradient buffer shaped like a ParamStore; row-sparse entries keep per-row maps.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& store) : dense_(store.size()), sparse_(store.size()), is_sparse_(store.size()) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      is_sparse_[i] = store.row_sparse(i);
      if (!is_sparse_[i]) dense_[i] = Matrix(store.value(i).rows(), store.value(i).cols());
    }
  }

  std::size_t size() const { return dense_.size(); }
  bool row_sparse(std::size_t i) const { return is_sparse_[i]; }
  Matrix& dense(std::size_t i) { return dense_[i]; }
  const Matrix& dense(std::size_t i) const { return dense_[i]; }
  numkit::RowGradients& rows(std::size_t i) { return sparse_[i]; }
  const numkit::RowGradients& rows(std::size_t i) const { return sparse_[i]; }

  void add_rows(std::size_t i, const numkit::RowGradients& src, double alpha = 1.0) {
    for (const auto& [row, g] : src) {
      auto& dst = sparse_[i][row];
      if (dst.empty()) dst.assign(g.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += alpha * g[k];
    }
  }

  void add(const Gradients& o) {
    for (std::size_t i = 0; i < size(); ++i) {
      if (is_sparse_[i]) add_rows(i, o.sparse_[i]);
      else numkit::axpy(dense_[i], o.dense_[i]);
    }
  }

  double squared_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (is_sparse_[i]) {
        for (const auto& [row, g] : sparse_[i])
          for (double v : g) s += v * v;
      } else {
        s += numkit::squared_norm(dense_[i]);
      }
    }
    return s;
  }

  void scale(double alpha) {
    for (std::size_t i = 0; i < size(); ++i) {
      if (is_sparse_[i]) {
        for (auto& [row, g] : sparse_[i])
          for (double& v : g) v *= alpha;
      } else {
        for (double& v : dense_[i].data()) v *= alpha;
      }
    }
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (is_sparse_[i]) {
        for (const auto& [row, g] : sparse_[i])
          for (double v : g)
            if (!std::isfinite(v)) return false;
      } else if (!numkit::all_finite(dense_[i])) {
        return false;
      }
    }
    return true;
  }

  /// Dense copy of entry i (row-sparse entries expanded to `rows` × cols).
  Matrix to_dense(std::size_t i, std::size_t rows, std::size_t cols) const {
    if (!is_sparse_[i]) return dense_[i];
    Matrix m(rows, cols);
    for (const auto& [row, g] : sparse_[i])
      for (std::size_t k = 0; k < g.size(); ++k) m(row, k) = g[k];
    return m;
  }

 private:
  std::vector<Matrix> dense_;
  std::vector<numkit::RowGradients> sparse_;
  std::vector<bool> is_sparse_;
};

/// Puts parameters on a tape on first use and collects their gradients.
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store) : tape_(tape), store_(store), vars_(store.size()) {}

  Tape& tape() { return tape_; }

  Var operator()(std::size_t i) {
    if (!vars_[i]) vars_[i] = tape_.leaf_ref(store_.value(i), store_.row_sparse(i));
    return *vars_[i];
  }

  /// into += gradients accumulated on the tape.
  void harvest(Gradients& into) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (!vars_[i]) continue;
      if (store_.row_sparse(i)) {
        into.add_rows(i, tape_.row_grad(*vars_[i]));
      } else if (const Matrix* g = tape_.grad(*vars_[i]); g && !g->empty()) {
        numkit::axpy(into.dense(i), *g);
      }
    }
  }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::vector<std::optional<Var>> vars_;
};

}  // namespace strsum

#endif  // STRSUM_PARAMS_HPP
