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

#include "strsum/numkit/adagrad.hpp"
#include "strsum/numkit/matrix.hpp"
#include "strsum/numkit/tape.hpp"
#include "strsum/structattn.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

namespace strsum::numkit {
namespace {

using testing::gradient_check;
using testing::project;
using testing::random_matrix;

TEST(InvertWithLogDet, Identity) {
  const auto r = invert_with_logdet(Matrix::identity(3));
  EXPECT_EQ(r.inverse, Matrix::identity(3));
  EXPECT_DOUBLE_EQ(r.logdet, 0.0);
  EXPECT_EQ(r.sign, 1);
}

TEST(InvertWithLogDet, Diagonal) {
  const auto r = invert_with_logdet(Matrix{{2, 0}, {0, 4}});
  EXPECT_LE(max_abs_diff(r.inverse, Matrix{{0.5, 0}, {0, 0.25}}), 1e-15);
  EXPECT_NEAR(r.logdet, std::log(8.0), 1e-15);
}

TEST(InvertWithLogDet, MatchesAdjugateFormula) {
  // [[a,b],[c,d]]⁻¹ = [[d,-b],[-c,a]] / (ad - bc)
  auto adjugate_inverse = [](const Matrix& m) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return Matrix{{m(1, 1) / det, -m(0, 1) / det}, {-m(1, 0) / det, m(0, 0) / det}};
  };
  const Matrix m{{1, 1}, {0, 1}};
  const auto r = invert_with_logdet(m);
  EXPECT_LE(max_abs_diff(r.inverse, adjugate_inverse(m)), 1e-15);
  EXPECT_LE(max_abs_diff(r.inverse, Matrix{{1, -1}, {0, 1}}), 1e-15);
  EXPECT_DOUBLE_EQ(r.logdet, 0.0);

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix q = random_matrix(rng, 2, 2, -3, 3);
    const double det = q(0, 0) * q(1, 1) - q(0, 1) * q(1, 0);
    if (std::abs(det) < 0.1) continue;
    const auto rq = invert_with_logdet(q);
    EXPECT_LE(max_abs_diff(rq.inverse, adjugate_inverse(q)), 1e-12);
    EXPECT_NEAR(rq.logdet, std::log(std::abs(det)), 1e-12);
    EXPECT_EQ(rq.sign, det > 0 ? 1 : -1);
  }
}

TEST(InvertWithLogDet, NegativeDeterminantSign) {
  const auto r = invert_with_logdet(Matrix{{0, 1}, {1, 0}});
  EXPECT_EQ(r.sign, -1);
  EXPECT_DOUBLE_EQ(r.logdet, 0.0);
}

TEST(InvertWithLogDet, SingularThrows) {
  EXPECT_THROW(invert_with_logdet(Matrix{{1, 2}, {2, 4}}), SingularMatrix);
  EXPECT_THROW(invert_with_logdet(Matrix(3, 3)), SingularMatrix);
  EXPECT_THROW(invert_with_logdet(Matrix(2, 3)), ShapeMismatch);
}

TEST(InvertWithLogDet, RoundTripOnWellConditionedMatrices) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    Matrix m = random_matrix(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += static_cast<double>(n);  // diagonally dominant
    const auto r = invert_with_logdet(m);
    EXPECT_LE(inf_norm(sub(matmul(m, r.inverse), Matrix::identity(n))), 1e-8);
  }
}

TEST(Adagrad, ZeroGradient) {
  const auto r = adagrad_step(1.0, 0.0, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(r.param, 1.0);
  EXPECT_DOUBLE_EQ(r.acc, 0.1);
}

TEST(Adagrad, SingleStepHandComputation) {
  // acc' = 0.1 + 0.25; param' = 1 - 0.1 * 0.5 / sqrt(0.35)
  const auto r = adagrad_step(1.0, 0.5, 0.1, 0.1);
  EXPECT_NEAR(r.acc, 0.35, 1e-15);
  EXPECT_NEAR(r.param, 0.915485, 1e-6);
}

TEST(Adagrad, ZeroLearningRate) {
  const auto r = adagrad_step(0.0, 1.7, 0.3, 0.0);
  EXPECT_DOUBLE_EQ(r.param, 0.0);
  EXPECT_DOUBLE_EQ(r.acc, 0.3 + 1.7 * 1.7);
}

TEST(Adagrad, AccumulatorsNonDecreasingAndDeterministic) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> params(16, 0.5), accs(16, 0.1), trace;
    for (int step = 0; step < 50; ++step) {
      std::vector<double> grads(16);
      for (double& g : grads) g = rng.uniform(-2, 2);
      const auto before = accs;
      adagrad_apply(params, grads, accs, 0.1, step % 2 == 0);
      for (std::size_t i = 0; i < accs.size(); ++i) EXPECT_GE(accs[i], before[i]);
      trace.insert(trace.end(), params.begin(), params.end());
    }
    return trace;
  };
  const auto a = run(3);
  const auto b = run(3);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(FiniteDiff, LinearFunction) {
  Rng rng(1);
  const Matrix x = random_matrix(rng, 3, 4);
  const Matrix g = finite_diff_gradient([](const Matrix& m) { return sum(m); }, x, 1e-5);
  EXPECT_LE(max_abs_diff(g, Matrix(3, 4, 1.0)), 1e-9);
}

TEST(FiniteDiff, Polynomial) {
  const Matrix g = finite_diff_gradient([](const Matrix& m) { return m[0] * m[0]; }, Matrix{{3.0}}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, LogPartitionOfUniformScoresGivesMarginals) {
  // Uniform scores over root + 2 sentences; marginals from enumerating the 3 trees.
  const Matrix f{{0, 1, 1}, {0, 0, 1}, {0, 1, 0}};
  auto logz = [](const Matrix& m) { return structattn::log_partition({m}); };
  const Matrix g = finite_diff_gradient(logz, f, 1e-6);
  EXPECT_NEAR(g(0, 1), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(g(0, 2), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(g(1, 2), 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(g(2, 1), 1.0 / 3.0, 1e-6);
}

TEST(FiniteDiff, RejectsStepOutOfRange) {
  EXPECT_THROW(finite_diff_gradient([](const Matrix& m) { return m[0]; }, Matrix(1, 1), 1e-2),
               std::invalid_argument);
}

// Backward rule of every primitive against central differences, 20 random
// inputs each.
struct PrimitiveCase {
  const char* name;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  testing::ScalarGraph graph;
  double lo = -1.0, hi = 1.0;
};

class PrimitiveGradient : public ::testing::TestWithParam<int> {};

std::vector<PrimitiveCase> primitive_cases() {
  using V = std::vector<Var>;
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](Tape&, const V& v) { return project(matmul(v[0], v[1]), 1); }},
      {"matmul_nt", {{3, 4}, {5, 4}}, [](Tape&, const V& v) { return project(matmul_nt(v[0], v[1]), 2); }},
      {"add", {{2, 3}, {2, 3}}, [](Tape&, const V& v) { return project(add(v[0], v[1]), 3); }},
      {"sub", {{2, 3}, {2, 3}}, [](Tape&, const V& v) { return project(sub(v[0], v[1]), 4); }},
      {"hadamard", {{2, 3}, {2, 3}}, [](Tape&, const V& v) { return project(hadamard(v[0], v[1]), 5); }},
      {"scale", {{2, 3}}, [](Tape&, const V& v) { return project(scale(v[0], -1.7), 6); }},
      {"add_bias", {{4, 3}, {1, 3}}, [](Tape&, const V& v) { return project(add_bias(v[0], v[1]), 7); }},
      {"tanh", {{3, 3}}, [](Tape&, const V& v) { return project(tanh(v[0]), 8); }, -2.0, 2.0},
      {"sigmoid", {{3, 3}}, [](Tape&, const V& v) { return project(sigmoid(v[0]), 9); }, -4.0, 4.0},
      {"exp", {{3, 3}}, [](Tape&, const V& v) { return project(exp(v[0]), 10); }},
      {"log", {{3, 3}}, [](Tape&, const V& v) { return project(log(v[0]), 11); }, 0.5, 2.0},
      {"one_minus", {{3, 2}}, [](Tape&, const V& v) { return project(one_minus(v[0]), 12); }},
      {"sum", {{3, 2}}, [](Tape&, const V& v) { return sum(tanh(v[0])); }},
      {"transpose", {{3, 2}}, [](Tape&, const V& v) { return project(transpose(v[0]), 13); }},
      {"concat_cols", {{3, 2}, {3, 4}}, [](Tape&, const V& v) { return project(concat_cols(v[0], v[1]), 14); }},
      {"slice_cols", {{3, 5}}, [](Tape&, const V& v) { return project(slice_cols(v[0], 1, 3), 15); }},
      {"slice_rows", {{5, 3}}, [](Tape&, const V& v) { return project(slice_rows(v[0], 2, 2), 16); }},
      {"gather_rows", {{6, 3}}, [](Tape&, const V& v) { return project(gather_rows(v[0], {4, 0, 4, 2}), 17); }},
      {"blend_rows",
       {{3, 4}, {3, 4}},
       [](Tape&, const V& v) { return project(blend_rows({1.0, 0.0, 1.0}, v[0], v[1]), 18); }},
      {"max_pool",
       {{3, 4}, {3, 4}, {3, 4}},
       [](Tape&, const V& v) {
         std::vector<std::vector<bool>> valid{{true, true, true}, {true, false, true}, {false, true, false}};
         return project(max_pool({v[0], v[1], v[2]}, valid), 19);
       }},
      {"nll_sum",
       {{3, 5}},
       [](Tape&, const V& v) { return nll_sum(v[0], {1, 4, 0}, {1.0, 0.0, 1.0}); },
       -3.0, 3.0},
      {"inverse",
       {{4, 4}},
       [](Tape& t, const V& v) { return project(inverse(add(v[0], t.constant(scaled(Matrix::identity(4), 4.0)))), 20); }},
      {"logdet",
       {{4, 4}},
       [](Tape& t, const V& v) { return logdet(add(v[0], t.constant(scaled(Matrix::identity(4), 4.0)))); }},
  };
}

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
  const auto cases = primitive_cases();
  const auto& c = cases[static_cast<std::size_t>(GetParam())];
  Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Matrix> inputs;
    for (auto [r, cols] : c.shapes) inputs.push_back(random_matrix(rng, r, cols, c.lo, c.hi));
    EXPECT_LE(gradient_check(c.graph, inputs), 1e-4) << c.name << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient,
                         ::testing::Range(0, static_cast<int>(primitive_cases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(primitive_cases()[static_cast<std::size_t>(info.param)].name);
                         });

TEST(Tape, RejectsNonFiniteValues) {
  Tape t;
  Var x = t.leaf(Matrix{{-1.0}});
  EXPECT_THROW(log(x), NonFinite);
}

TEST(Tape, MaxPoolTiesGoToEarliestStep) {
  Tape t;
  Var a = t.leaf(Matrix{{1.0, -2.0}});
  Var b = t.leaf(Matrix{{0.0, 3.0}});
  Var c = t.leaf(Matrix{{1.0, 3.0}});
  Var pooled = max_pool({a, b, c}, {{true, true, true}});
  EXPECT_EQ(pooled.value(), (Matrix{{1.0, 3.0}}));
  t.backward(sum(pooled));
  EXPECT_EQ(*t.grad(a), (Matrix{{1.0, 0.0}}));
  EXPECT_EQ(*t.grad(b), (Matrix{{0.0, 1.0}}));
  EXPECT_EQ(t.grad(c), nullptr);
}

TEST(Tape, RowSparseLeafCollectsOnlyTouchedRows) {
  Matrix table{{1, 2}, {3, 4}, {5, 6}};
  Tape t;
  Var leaf = t.leaf_ref(table, /*row_sparse=*/true);
  t.backward(sum(gather_rows(leaf, {2, 2, 0})));
  const auto& rows = t.row_grad(leaf);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows.at(2), (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(rows.at(0), (std::vector<double>{1.0, 1.0}));
}

}  // namespace
}  // namespace strsum::numkit
