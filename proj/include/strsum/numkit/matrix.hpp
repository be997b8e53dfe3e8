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

#ifndef STRSUM_NUMKIT_MATRIX_HPP
#define STRSUM_NUMKIT_MATRIX_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace strsum::numkit {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value became NaN or infinite inside an operation.
class NonFinite : public NumericError {
 public:
  using NumericError::NumericError;
};

/// LU pivot fell below the singularity tolerance.
class SingularMatrix : public NumericError {
 public:
  using NumericError::NumericError;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSingularityTolerance = 1e-12;

/// Dense row-major matrix of doubles. Vectors are 1×n or n×1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeMismatch("Matrix: data length " + std::to_string(data_.size()) +
                          " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeMismatch("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix row_vector(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }
  static Matrix column_vector(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {
using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
inline Eigen::Map<const EigenRowMajor> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<EigenRowMajor> view(Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}
}  // namespace detail

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

inline void require_finite(const Matrix& m, const std::string& where) {
  if (!all_finite(m)) throw NonFinite("non-finite value in " + where);
}

// a · b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  if (!out.empty() && a.cols() > 0) detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return out;
}

// aᵀ · b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  if (!out.empty() && a.rows() > 0)
    detail::view(out).noalias() = detail::view(a).transpose() * detail::view(b);
  return out;
}

// a · bᵀ
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  if (!out.empty() && a.cols() > 0)
    detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "sub");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

/// dst += alpha · src
inline void axpy(Matrix& dst, const Matrix& src, double alpha = 1.0) {
  detail::require_same_shape(dst, src, "axpy");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

inline double sum(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

inline double squared_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

/// Max-row-sum norm.
inline double inf_norm(const Matrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "max_abs_diff");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

/// LU factorization with partial pivoting, P·M = L·U packed into one matrix.
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix m, double tolerance = kSingularityTolerance)
      : lu_(std::move(m)), perm_(lu_.rows()) {
    if (lu_.rows() != lu_.cols()) throw ShapeMismatch("LU: matrix is not square");
    const std::size_t n = lu_.rows();
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t pivot = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          pivot = i;
        }
      }
      if (!(best > tolerance)) {
        throw SingularMatrix("LU: pivot " + std::to_string(best) + " at column " +
                             std::to_string(k) + " below tolerance");
      }
      if (pivot != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(pivot, j));
        std::swap(perm_[k], perm_[pivot]);
        sign_ = -sign_;
      }
      const double diag = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double factor = lu_(i, k) / diag;
        lu_(i, k) = factor;
        if (factor == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= factor * lu_(k, j);
      }
    }
  }

  std::size_t dim() const { return lu_.rows(); }

  /// log|det M| and the sign of det M.
  double log_abs_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += std::log(std::abs(lu_(i, i)));
    return s;
  }
  int det_sign() const {
    int s = sign_;
    for (std::size_t i = 0; i < dim(); ++i)
      if (lu_(i, i) < 0.0) s = -s;
    return s;
  }

  /// Solves M·X = B for every column of B.
  Matrix solve(const Matrix& b) const {
    const std::size_t n = dim();
    if (b.rows() != n) throw ShapeMismatch("LU solve: right-hand side has wrong row count");
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        double v = b(perm_[i], c);
        for (std::size_t j = 0; j < i; ++j) v -= lu_(i, j) * y[j];
        y[i] = v;
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double v = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) v -= lu_(ii, j) * x(j, c);
        x(ii, c) = v / lu_(ii, ii);
      }
    }
    return x;
  }

  Matrix inverse() const { return solve(Matrix::identity(dim())); }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
};

struct InverseWithLogDet {
  Matrix inverse;
  double logdet = 0.0;  // log|det M|
  int sign = 1;         // sign of det M
};

inline InverseWithLogDet invert_with_logdet(const Matrix& m) {
  LuDecomposition lu(m);
  return {lu.inverse(), lu.log_abs_det(), lu.det_sign()};
}

/// Central-difference gradient of a scalar function, entry by entry.
template <typename F>
Matrix finite_diff_gradient(F&& f, const Matrix& x, double eps = 1e-6) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("finite_diff_gradient: eps out of [1e-7, 1e-4]");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(static_cast<const Matrix&>(probe));
    probe[i] = orig - eps;
    const double down = f(static_cast<const Matrix&>(probe));
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace strsum::numkit

#endif  // STRSUM_NUMKIT_MATRIX_HPP
