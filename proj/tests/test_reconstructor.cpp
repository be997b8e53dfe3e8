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

#include "strsum/model.hpp"
#include "strsum/reconstructor.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace strsum::reconstructor {
namespace {

using corpus::Document;
using numkit::Matrix;
using numkit::Rng;

ModelDims small_dims(std::size_t vocab = 20) {
  ModelDims d;
  d.vocab = vocab;
  d.embed = 16;
  d.enc_hidden = 8;
  d.d_e = 10;
  d.d_f = 6;
  d.dec_hidden = 16;
  return d;
}

Document random_document(Rng& rng, std::size_t n, std::size_t vocab, std::string id = "doc") {
  Document d;
  d.id = std::move(id);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> sent{corpus::kBos};
    for (std::size_t t = 1 + rng.below(5); t > 0; --t) sent.push_back(corpus::kNumSpecials + rng.below(vocab - corpus::kNumSpecials));
    sent.push_back(corpus::kEos);
    d.sentences.push_back(std::move(sent));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Parent embeddings.

struct CombinerFixture {
  ParamStore store;
  CombinerLayers layers;
  explicit CombinerFixture(std::size_t d_e) {
    Rng rng(1);
    layers = CombinerLayers::create(store, d_e, rng);
  }
};

TEST(ParentEmbeddings, SingleSentenceWithIdentityCombiner) {
  CombinerFixture f(3);
  f.store.value(f.layers.weight) = Matrix::identity(3);
  const Matrix semantic{{0.5, -1.0, 2.0}};
  const Matrix s = parent_embeddings(structattn::tree_marginals({Matrix{{0, 1}, {0, 0}}}), semantic, f.store, f.layers);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(s(0, c), std::tanh(semantic(0, c)), 1e-15);
    EXPECT_EQ(s(1, c), 0.0);
  }
}

TEST(ParentEmbeddings, ChildlessParentIsTanhOfBias) {
  CombinerFixture f(2);
  f.store.value(f.layers.bias) = Matrix{{0.3, -0.7}};
  Matrix a(3, 3);
  a(0, 1) = a(0, 2) = 1.0;  // sentence nodes have no children
  const Matrix s = parent_embeddings({a}, Matrix{{1.0, 2.0}, {3.0, 4.0}}, f.store, f.layers);
  for (std::size_t i = 1; i <= 2; ++i) {
    EXPECT_NEAR(s(i, 0), std::tanh(0.3), 1e-15);
    EXPECT_NEAR(s(i, 1), std::tanh(-0.7), 1e-15);
  }
}

TEST(ParentEmbeddings, UniformTwoSentenceRoot) {
  CombinerFixture f(2);
  Rng rng(2);
  f.store.value(f.layers.weight) = strsum::testing::random_matrix(rng, 2, 2);
  f.store.value(f.layers.bias) = strsum::testing::random_matrix(rng, 1, 2);
  const Matrix semantic = strsum::testing::random_matrix(rng, 2, 2);
  const auto m = structattn::tree_marginals({Matrix{{0, 1, 1}, {0, 0, 1}, {0, 1, 0}}});
  const Matrix s = parent_embeddings(m, semantic, f.store, f.layers);
  const Matrix& w = f.store.value(f.layers.weight);
  const Matrix& b = f.store.value(f.layers.bias);
  for (std::size_t c = 0; c < 2; ++c) {
    double pre = b(0, c);
    for (std::size_t k = 0; k < 2; ++k) pre += (2.0 / 3.0) * (semantic(0, k) + semantic(1, k)) * w(k, c);
    EXPECT_NEAR(s(0, c), std::tanh(pre), 1e-12);
  }
}

TEST(ParentEmbeddings, ShapeChecked) {
  CombinerFixture f(2);
  EXPECT_THROW(parent_embeddings(structattn::tree_marginals({Matrix{{0, 1}, {0, 0}}}), Matrix(2, 2), f.store, f.layers),
               numkit::ShapeMismatch);
}

// ---------------------------------------------------------------------------
// Reconstruction loss.

TEST(ReconstructionLoss, UniformOutputIsLogVocabPerToken) {
  Model model = Model::create(small_dims(), 3, Precision::kFloat64);
  model.params.value(model.decoder.out_w).fill(0.0);
  model.params.value(model.decoder.out_b).fill(0.0);
  Rng rng(4);
  const Document doc = random_document(rng, 3, 20);
  const LossValue l = document_loss(model, doc);
  EXPECT_EQ(l.tokens, target_count(doc.sentences));
  EXPECT_NEAR(l.per_token(), std::log(20.0), 1e-12);
}

TEST(ReconstructionLoss, TargetCountSkipsBos) {
  EXPECT_EQ(target_count({{2, 5, 3}, {2, 3}}), 3u);
  EXPECT_EQ(target_count({}), 0u);
}

TEST(ReconstructionLoss, PaddingDoesNotLeakAcrossSentences) {
  // The loss of a batch of sentences is the sum of their individual losses.
  const Model model = Model::create(small_dims(), 5, Precision::kFloat64);
  Rng rng(6);
  const Matrix parents = strsum::testing::random_matrix(rng, 3, 10);
  const std::vector<std::vector<std::size_t>> sents{{2, 5, 6, 7, 3}, {2, 3}, {2, 8, 3}};
  auto nll = [&](const Matrix& rows, const std::vector<std::vector<std::size_t>>& s) {
    Tape tape(false);
    Binding p(tape, model.params);
    return reconstruction_nll(p, model.decoder, tape.constant(rows), s).value()[0];
  };
  double separate = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix r(1, 10);
    for (std::size_t c = 0; c < 10; ++c) r(0, c) = parents(i, c);
    separate += nll(r, {sents[i]});
  }
  EXPECT_NEAR(nll(parents, sents), separate, 1e-12);
}

TEST(ReconstructionLoss, SingleTokenVocabularyFitsToZero) {
  // One regular token: after training the decoder predicts it and EOS perfectly.
  ModelDims d = small_dims(corpus::kNumSpecials + 1);
  Model model = Model::create(d, 7, Precision::kFloat64);
  Document doc{"one", {{2, 4, 4, 3}, {2, 4, 4, 3}}, std::nullopt, std::nullopt};
  Optimizer opt(model, {});
  TrainingConfig cfg;
  cfg.learning_rate = 0.5;
  const double before = document_loss(model, doc).per_token();
  for (int i = 0; i < 200; ++i) training_step(model, opt, {&doc}, cfg, 1);
  const double after = document_loss(model, doc).per_token();
  EXPECT_LT(after, 0.05);
  EXPECT_LT(after, before);
}

// ---------------------------------------------------------------------------
// End-to-end gradients.

TEST(EndToEndGradient, EveryParameterMatchesFiniteDifferences) {
  for (bool tied : {false, true}) {
    ModelDims d = small_dims();
    d.tied_output = tied;
    Model model = Model::create(d, 8, Precision::kFloat64);
    Rng rng(9);
    for (std::size_t i = 0; i < model.params.size(); ++i)
      for (double& v : model.params.value(i).data()) v = rng.uniform(-0.3, 0.3);
    const Document doc = random_document(rng, 3, d.vocab);
    const auto errors = strsum::testing::param_gradient_errors(model.params, [&](Binding& p) {
      const auto g = forward_structure(p, model, doc);
      return document_nll(p, model, doc, g);
    }, 1e-5);
    std::set<std::string> groups;
    for (const auto& [name, err] : errors) {
      EXPECT_LE(err, 1e-3) << name << (tied ? " (tied)" : "");
      groups.insert(name.substr(0, name.find('.')));
    }
    EXPECT_EQ(groups, (std::set<std::string>{"combiner", "decoder", "embedding", "encoder", "structure"}));
  }
}

TEST(EndToEndGradient, BatchGradientIndependentOfWorkerCount) {
  const Model model = Model::create(small_dims(), 10, Precision::kFloat32);
  Rng rng(11);
  std::vector<Document> docs;
  for (int i = 0; i < 11; ++i) docs.push_back(random_document(rng, 1 + rng.below(4), 20, std::to_string(i)));
  std::vector<const Document*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  const BatchGradient one = batch_gradient(model, ptrs, 1);
  const BatchGradient four = batch_gradient(model, ptrs, 4);
  EXPECT_EQ(one.loss.nll, four.loss.nll);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const Matrix& v = model.params.value(i);
    EXPECT_EQ(one.grads.to_dense(i, v.rows(), v.cols()), four.grads.to_dense(i, v.rows(), v.cols())) << model.params.name(i);
  }
}

// ---------------------------------------------------------------------------
// Training step.

TEST(TrainingStep, ZeroGradientLeavesParametersUnchanged) {
  Model model = Model::create(small_dims(), 12);
  const ParamStore before = model.params;
  Optimizer opt(model, {});
  opt.apply(model, Gradients(model.params));
  EXPECT_TRUE(model.params == before);
}

TEST(TrainingStep, SingleScalarFollowsAdagradHandExample) {
  Model model = Model::create(small_dims(), 13, Precision::kFloat64);
  Optimizer opt(model, {});
  const std::size_t b = model.combiner.bias;
  model.params.value(b)(0, 0) = 1.0;
  Gradients g(model.params);
  g.dense(b)(0, 0) = 0.5;
  opt.apply(model, g);
  EXPECT_NEAR(model.params.value(b)(0, 0), 0.915485, 1e-6);
  EXPECT_NEAR(opt.accumulators()[b](0, 0), 0.35, 1e-15);
}

TEST(TrainingStep, SameSeedAndBatchGiveIdenticalParameters) {
  Rng rng(14);
  std::vector<Document> docs;
  for (int i = 0; i < 5; ++i) docs.push_back(random_document(rng, 3, 20, std::to_string(i)));
  std::vector<const Document*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  auto run = [&] {
    Model model = Model::create(small_dims(), 15);
    Optimizer opt(model, {});
    for (int i = 0; i < 3; ++i) training_step(model, opt, ptrs, TrainingConfig{});
    return model.params;
  };
  EXPECT_TRUE(run() == run());
}

TEST(TrainingStep, Float32StorageIsRounded) {
  Rng rng(16);
  const Document doc = random_document(rng, 2, 20);
  Model model = Model::create(small_dims(), 17);
  Optimizer opt(model, {});
  training_step(model, opt, {&doc}, TrainingConfig{});
  for (std::size_t i = 0; i < model.params.size(); ++i)
    for (double v : model.params.value(i).data()) ASSERT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(TrainingStep, ClipsGlobalNorm) {
  Rng rng(18);
  const Document doc = random_document(rng, 3, 20);
  Model model = Model::create(small_dims(), 19, Precision::kFloat64);
  for (std::size_t i = 0; i < model.params.size(); ++i)
    for (double& v : model.params.value(i).data()) v *= 20.0;
  Model copy = model;
  Optimizer opt(model, {});
  TrainingConfig cfg;
  cfg.clip_norm = 1e-3;
  const StepResult r = training_step(model, opt, {&doc}, cfg, 1);
  EXPECT_GT(r.grad_norm, cfg.clip_norm);
  // With clipping, every Adagrad step is at most lr * |g| / sqrt(acc0).
  double worst = 0.0;
  for (std::size_t i = 0; i < model.params.size(); ++i)
    worst = std::max(worst, numkit::max_abs_diff(model.params.value(i), copy.params.value(i)));
  EXPECT_LE(worst, cfg.learning_rate * cfg.clip_norm / std::sqrt(cfg.initial_accumulator) + 1e-15);
}

TEST(TrainingStep, LossDecreasesOnRepeatedBatch) {
  Rng rng(20);
  std::vector<Document> docs;
  for (int i = 0; i < 4; ++i) docs.push_back(random_document(rng, 3, 20, std::to_string(i)));
  std::vector<const Document*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  Model model = Model::create(small_dims(), 21);
  Optimizer opt(model, {});
  double previous = corpus_loss(model, ptrs);
  for (int epoch = 0; epoch < 10; ++epoch) {
    training_step(model, opt, ptrs, TrainingConfig{});
    const double now = corpus_loss(model, ptrs);
    EXPECT_LT(now, previous + 1e-3);
    previous = now;
  }
}

// ---------------------------------------------------------------------------
// Beam search.

// Explicit next-token table keyed by prefix. Token 3 is EOS.
struct TableModel {
  using State = std::vector<std::size_t>;
  std::map<State, std::vector<double>> probs;
  std::vector<double> fallback;

  State initial() const { return {}; }
  std::vector<double> log_probs(const State& s) const {
    auto it = probs.find(s);
    const auto& p = it == probs.end() ? fallback : it->second;
    std::vector<double> out;
    for (double x : p) out.push_back(std::log(x));
    return out;
  }
  State advance(State s, std::size_t tok) const {
    s.push_back(tok);
    return s;
  }
};

TableModel two_step_model() {
  TableModel m;
  m.probs[{}] = {0.6, 0.4, 1e-9, 1e-9};
  m.probs[{0}] = {0.25, 0.25, 0.2, 0.3};
  m.probs[{1}] = {0.05, 0.03, 0.02, 0.9};
  m.fallback = {0.1, 0.1, 0.1, 0.7};
  return m;
}

TEST(BeamSearch, WiderBeamFindsHigherTotalPath) {
  TableModel m = two_step_model();
  BeamOptions opt;
  opt.eos = 3;
  opt.max_len = 2;
  opt.beam = 1;
  const Hypothesis greedy = beam_search(m, opt);
  EXPECT_EQ(greedy.tokens, (std::vector<std::size_t>{0, 3}));
  EXPECT_NEAR(std::exp(greedy.log_prob), 0.18, 1e-12);
  opt.beam = 2;
  const Hypothesis beam = beam_search(m, opt);
  EXPECT_EQ(beam.tokens, (std::vector<std::size_t>{1, 3}));
  EXPECT_NEAR(std::exp(beam.log_prob), 0.36, 1e-12);
  EXPECT_TRUE(beam.ended);
}

TEST(BeamSearch, BeamOneIsGreedy) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    TableModel m;
    std::vector<double> p(5);
    double z = 0.0;
    for (double& x : p) z += (x = rng.uniform(0.01, 1.0));
    for (double& x : p) x /= z;
    m.fallback = p;
    for (int k = 0; k < 30; ++k) {
      TableModel::State s;
      for (std::size_t len = rng.below(4); len > 0; --len) s.push_back(rng.below(4));
      std::vector<double> q(5);
      double zq = 0.0;
      for (double& x : q) zq += (x = rng.uniform(0.01, 1.0));
      for (double& x : q) x /= zq;
      m.probs[s] = q;
    }
    BeamOptions opt;
    opt.eos = 4;
    opt.beam = 1;
    opt.max_len = 6;
    // Greedy oracle.
    TableModel::State s;
    double lp = 0.0;
    for (std::size_t t = 0; t < opt.max_len; ++t) {
      const auto l = m.log_probs(s);
      const std::size_t k = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
      lp += l[k];
      s.push_back(k);
      if (k == opt.eos) break;
    }
    const Hypothesis h = beam_search(m, opt);
    EXPECT_EQ(h.tokens, s);
    EXPECT_NEAR(h.log_prob, lp, 1e-12);
    for (std::size_t width : {2u, 3u, 10u}) {
      opt.beam = width;
      EXPECT_GE(beam_search(m, opt).log_prob, lp - 1e-12);
    }
  }
}

TEST(BeamSearch, StopsAtMaxLengthAndHonorsBans) {
  TableModel m;
  m.fallback = {0.1, 0.8, 0.1 - 1e-6, 1e-6};
  BeamOptions opt;
  opt.eos = 3;
  opt.max_len = 4;
  opt.beam = 3;
  opt.banned = {1};
  const Hypothesis h = beam_search(m, opt);
  EXPECT_EQ(h.tokens, (std::vector<std::size_t>{0, 0, 0, 0}));
  EXPECT_FALSE(h.ended);
}

TEST(BeamSearch, TiesPreferEarlierCompletionThenLowerIds) {
  TableModel m;
  m.probs[{}] = {0.25, 0.25, 0.25, 0.25};
  m.fallback = {0.0, 0.0, 0.0, 1.0};
  BeamOptions opt;
  opt.eos = 3;
  opt.beam = 4;
  const Hypothesis h = beam_search(m, opt);
  EXPECT_EQ(h.tokens, std::vector<std::size_t>{3});
  m.probs[{}] = {0.5, 0.5, 0.0, 0.0};
  EXPECT_EQ(beam_search(m, opt).tokens, (std::vector<std::size_t>{0, 3}));
}

TEST(BeamSearch, RejectsZeroBeam) {
  TableModel m = two_step_model();
  BeamOptions opt;
  opt.beam = 0;
  EXPECT_THROW(beam_search(m, opt), std::invalid_argument);
}

TEST(Generation, DeterministicAndWellFormed) {
  const Model model = Model::create(small_dims(), 23);
  Rng rng(24);
  const Document doc = random_document(rng, 4, 20);
  GenerationOptions opt;
  opt.beam = 3;
  opt.max_len = 8;
  const Generated a = generate_summary(model, doc, opt);
  const Generated b = generate_summary(model, doc, opt);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.log_prob, b.log_prob);
  EXPECT_LE(a.tokens.size(), opt.max_len);
  for (std::size_t t : a.tokens) {
    EXPECT_NE(t, corpus::kPad);
    EXPECT_NE(t, corpus::kBos);
    EXPECT_NE(t, corpus::kEos);
  }
  EXPECT_TRUE(discourse::is_valid_tree(a.analysis.tree));
}

TEST(Generation, SingleSentenceIsForcedUnderRoot) {
  const Model model = Model::create(small_dims(), 25);
  const Document doc{"single", {{2, 7, 8, 3}}, std::nullopt, std::nullopt};
  GenerationOptions opt;
  opt.beam = 2;
  opt.max_len = 5;
  const Generated g = generate_summary(model, doc, opt);
  EXPECT_EQ(g.analysis.tree.parent, std::vector<std::size_t>{0});
  EXPECT_NEAR(g.analysis.marginals.a(0, 1), 1.0, 1e-12);
  // The summary embedding is the combiner applied to s_1 alone, with or without reranking.
  EXPECT_LE(numkit::max_abs_diff(summary_embedding(model, g.analysis, true), summary_embedding(model, g.analysis, false)), 1e-12);
}

}  // namespace
}  // namespace strsum::reconstructor
