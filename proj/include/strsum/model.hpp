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

#ifndef STRSUM_MODEL_HPP
#define STRSUM_MODEL_HPP

#include "strsum/corpus/document.hpp"
#include "strsum/discourse.hpp"
#include "strsum/encoder.hpp"
#include "strsum/errors.hpp"
#include "strsum/numkit/adagrad.hpp"
#include "strsum/params.hpp"
#include "strsum/reconstructor.hpp"
#include "strsum/structattn.hpp"
#include "strsum/threads.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace strsum {

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t embed = 300;
  std::size_t enc_hidden = 256;  // per direction
  std::size_t d_e = 384;
  std::size_t d_f = 128;
  std::size_t dec_hidden = 256;
  bool tied_output = false;

  void validate() const {
    if (vocab <= corpus::kNumSpecials) throw std::invalid_argument("model: vocabulary has no regular tokens");
    if (embed == 0 || enc_hidden == 0 || dec_hidden == 0) throw std::invalid_argument("model: zero dimension");
    if (d_e == 0 || d_f == 0) throw std::invalid_argument("model: d_e and d_f must both be positive");
    if (d_e + d_f != 2 * enc_hidden)
      throw std::invalid_argument("model: d_e + d_f must equal 2 * enc_hidden (" + std::to_string(2 * enc_hidden) + ")");
    if (tied_output && dec_hidden != embed) throw std::invalid_argument("model: tied output needs dec_hidden == embed");
  }
  bool operator==(const ModelDims&) const = default;
};

enum class Precision { kFloat32, kFloat64 };

/// Random word vectors are uniform(-1, 1): large enough that sentence
/// content survives the small-weight GRU and reaches the decoder early on.
inline constexpr double kEmbeddingBound = 1.0;

struct Model {
  ModelDims dims;
  Precision precision = Precision::kFloat32;
  ParamStore params;
  encoder::EncoderLayers encoder;
  structattn::StructureLayers structure;
  reconstructor::CombinerLayers combiner;
  reconstructor::DecoderLayers decoder;

  /// GRU and scoring weights uniform(-0.08, 0.08), projections Glorot-uniform,
  /// embeddings uniform(-1, 1), biases zero.
  static Model create(const ModelDims& dims, std::uint64_t seed, Precision precision = Precision::kFloat32) {
    dims.validate();
    Model m;
    m.dims = dims;
    m.precision = precision;
    numkit::Rng rng(seed);
    m.encoder.embedding = m.params.add("embedding", uniform_matrix(dims.vocab, dims.embed, kEmbeddingBound, rng),
                                       /*row_sparse=*/!dims.tied_output);
    m.encoder.forward = encoder::GruLayer::create(m.params, "encoder.fwd", dims.embed, dims.enc_hidden, rng);
    m.encoder.backward = encoder::GruLayer::create(m.params, "encoder.bwd", dims.embed, dims.enc_hidden, rng);
    m.structure = structattn::StructureLayers::create(m.params, dims.d_f, rng);
    m.combiner = reconstructor::CombinerLayers::create(m.params, dims.d_e, rng);
    m.decoder = reconstructor::DecoderLayers::create(m.params, dims.d_e, dims.embed, dims.dec_hidden, dims.vocab,
                                                     m.encoder.embedding, dims.tied_output, rng);
    if (precision == Precision::kFloat32) m.round_to_storage();
    return m;
  }

  void round_to_storage() {
    if (precision != Precision::kFloat32) return;
    for (std::size_t i = 0; i < params.size(); ++i)
      for (double& v : params.value(i).data()) v = static_cast<float>(v);
  }
};

/// Tape nodes for one document's forward pass up to the parent embeddings.
struct DocumentGraph {
  Var sentences;   // n × d
  Var semantic;    // n × d_e
  Var structure;   // n × d_f
  Var scores;      // (n+1) × (n+1)
  Var marginals;   // (n+1) × (n+1)
  Var parents;     // (n+1) × d_e, row 0 = summary embedding
};

inline std::vector<std::vector<std::size_t>> encoder_inputs(const corpus::Document& doc) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : doc.sentences) out.push_back(encoder::inner_tokens(s));
  return out;
}

inline DocumentGraph forward_structure(Binding& p, const Model& model, const corpus::Document& doc) {
  if (doc.n() == 0) throw EmptyDocument();
  DocumentGraph g;
  g.sentences = encoder::encode_sentences(p, model.encoder, encoder_inputs(doc));
  std::tie(g.semantic, g.structure) = encoder::split_embedding(g.sentences, model.dims.d_e);
  g.scores = model.structure.scores(p, g.structure);
  g.marginals = structattn::tree_marginals(g.scores);
  g.parents = model.combiner.apply(p, reconstructor::child_columns(g.marginals), g.semantic);
  return g;
}

/// Summed reconstruction NLL of every sentence from its parent embedding (ŝ_0 excluded).
inline Var document_nll(Binding& p, const Model& model, const corpus::Document& doc, const DocumentGraph& g) {
  Var rows = numkit::slice_rows(g.parents, 1, doc.n());
  return reconstructor::reconstruction_nll(p, model.decoder, rows, doc.sentences);
}

struct LossValue {
  double nll = 0.0;
  std::size_t tokens = 0;
  double per_token() const { return tokens ? nll / static_cast<double>(tokens) : 0.0; }
};

inline LossValue document_loss(const Model& model, const corpus::Document& doc) {
  Tape tape(false);
  Binding p(tape, model.params);
  const auto g = forward_structure(p, model, doc);
  return {document_nll(p, model, doc, g).value()[0], reconstructor::target_count(doc.sentences)};
}

/// Token-normalized loss over several documents.
inline double corpus_loss(const Model& model, const std::vector<const corpus::Document*>& docs) {
  LossValue total;
  for (const auto* d : docs) {
    const auto l = document_loss(model, *d);
    total.nll += l.nll;
    total.tokens += l.tokens;
  }
  return total.per_token();
}

/// Gradient of the batch loss Σ nll / Σ tokens.
struct BatchGradient {
  Gradients grads;
  LossValue loss;
};

inline constexpr std::size_t kGradientSlots = 8;

/// Documents are spread over a fixed number of gradient slots (document k
/// goes to slot k mod 8) and slots are summed in order, so the result does
/// not depend on the worker count.
inline BatchGradient batch_gradient(const Model& model, const std::vector<const corpus::Document*>& docs,
                                    std::size_t workers = worker_count()) {
  std::size_t total_tokens = 0;
  for (const auto* d : docs) total_tokens += reconstructor::target_count(d->sentences);
  if (total_tokens == 0) throw InputError("batch has no target tokens");
  const double seed = 1.0 / static_cast<double>(total_tokens);

  const std::size_t slots = std::min(kGradientSlots, docs.size());
  std::vector<Gradients> slot_grads;
  for (std::size_t s = 0; s < slots; ++s) slot_grads.emplace_back(model.params);
  std::vector<double> nll(docs.size(), 0.0);

  parallel_for(slots, workers, [&](std::size_t s) {
    for (std::size_t k = s; k < docs.size(); k += slots) {
      const corpus::Document& doc = *docs[k];
      try {
        Tape tape;
        Binding p(tape, model.params);
        const auto g = forward_structure(p, model, doc);
        Var loss = document_nll(p, model, doc, g);
        nll[k] = loss.value()[0];
        tape.backward(loss, seed);
        p.harvest(slot_grads[s]);
      } catch (const numkit::NumericError& e) {
        throw NonFiniteLoss(doc.id, e.what());
      }
    }
  });

  BatchGradient out{Gradients(model.params), {}};
  for (const auto& g : slot_grads) out.grads.add(g);
  for (double v : nll) out.loss.nll += v;
  out.loss.tokens = total_tokens;
  return out;
}

struct TrainingConfig {
  double learning_rate = 0.1;
  double initial_accumulator = 0.1;
  std::size_t batch_size = 16;
  double clip_norm = 5.0;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 1;
  std::size_t beam_size = 10;
  double damping = 0.9;

  void validate() const {
    if (!(learning_rate > 0 && initial_accumulator > 0 && clip_norm > 0))
      throw std::invalid_argument("training: learning rate, initial accumulator and clip norm must be positive");
    if (batch_size < 1 || max_epochs < 1 || beam_size < 1)
      throw std::invalid_argument("training: batch size, epochs and beam must be >= 1");
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("training: damping must be in [0, 1)");
  }
  bool operator==(const TrainingConfig&) const = default;
};

/// Adagrad accumulators for every parameter.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const Model& model, numkit::AdagradConfig cfg) : cfg_(cfg) {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      const Matrix& v = model.params.value(i);
      acc_.emplace_back(v.rows(), v.cols(), cfg.initial_accumulator);
    }
    if (model.precision == Precision::kFloat32)
      for (auto& a : acc_)
        for (double& x : a.data()) x = static_cast<float>(x);
  }

  const numkit::AdagradConfig& config() const { return cfg_; }
  std::vector<Matrix>& accumulators() { return acc_; }
  const std::vector<Matrix>& accumulators() const { return acc_; }

  void apply(Model& model, const Gradients& g) {
    auto& acc = acc_;
    const bool round = model.precision == Precision::kFloat32;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      Matrix& value = model.params.value(i);
      if (g.row_sparse(i)) {
        // Untouched rows have zero gradient; Adagrad leaves them unchanged.
        for (const auto& [row, grad] : g.rows(i))
          numkit::adagrad_apply(value.row(row), grad, acc[i].row(row), cfg_.learning_rate, round);
      } else {
        numkit::adagrad_apply(value.data(), g.dense(i).data(), acc[i].data(), cfg_.learning_rate, round);
      }
    }
  }

 private:
  numkit::AdagradConfig cfg_;
  std::vector<Matrix> acc_;
};

struct StepResult {
  double loss = 0.0;  // per token, before the update
  std::size_t tokens = 0;
  double grad_norm = 0.0;  // before clipping
};

/// Forward, backward, global-norm clipping and one Adagrad update.
inline StepResult training_step(Model& model, Optimizer& opt, const std::vector<const corpus::Document*>& batch,
                                const TrainingConfig& cfg, std::size_t workers = worker_count()) {
  BatchGradient bg = batch_gradient(model, batch, workers);
  if (!std::isfinite(bg.loss.nll) || !bg.grads.all_finite()) {
    // Name the first document whose own loss is not finite, if any.
    std::string id = batch.empty() ? "" : batch.front()->id;
    for (const auto* d : batch) {
      bool bad = false;
      try {
        bad = !std::isfinite(document_loss(model, *d).nll);
      } catch (const numkit::NumericError&) {
        bad = true;
      }
      if (bad) {
        id = d->id;
        break;
      }
    }
    throw NonFiniteLoss(id, "loss or gradient is not finite");
  }
  StepResult r{bg.loss.per_token(), bg.loss.tokens, std::sqrt(bg.grads.squared_norm())};
  if (r.grad_norm > cfg.clip_norm) bg.grads.scale(cfg.clip_norm / r.grad_norm);
  opt.apply(model, bg.grads);
  return r;
}

// ---------------------------------------------------------------------------
// Inference.

/// Structure of one document under the model.
struct Analysis {
  structattn::Marginals marginals;
  discourse::RankVector rank;
  discourse::DiscourseTree tree;
  Matrix semantic;  // n × d_e
};

inline Analysis analyze(const Model& model, const corpus::Document& doc, double damping,
                        discourse::TreeObjective objective = discourse::TreeObjective::kLogProduct) {
  Tape tape(false);
  Binding p(tape, model.params);
  const auto g = forward_structure(p, model, doc);
  Analysis a;
  a.marginals.a = g.marginals.value();
  a.semantic = g.semantic.value();
  a.rank = discourse::discourse_rank(discourse::build_stochastic(a.marginals), damping);
  a.tree = discourse::extract_tree(a.marginals, objective);
  return a;
}

/// ŝ_0 from the root row of A, or from the DiscourseRank-reweighted root row.
inline Matrix summary_embedding(const Model& model, const Analysis& a, bool use_discourse_rank) {
  const std::size_t n = a.marginals.n();
  Matrix weights(1, n);
  if (use_discourse_rank) {
    const auto reranked = discourse::rerank_root(a.marginals, a.rank);
    for (std::size_t j = 1; j <= n; ++j) weights(0, j - 1) = reranked[j];
  } else {
    for (std::size_t j = 1; j <= n; ++j) weights(0, j - 1) = a.marginals.a(0, j);
  }
  Tape tape(false);
  Binding p(tape, model.params);
  return model.combiner.apply(p, tape.constant(weights), tape.constant(a.semantic)).value();
}

/// Decoder as a step model for beam_search, conditioned on one embedding.
class DecoderStepper {
 public:
  using State = Matrix;  // hidden state after consuming the prefix

  DecoderStepper(const Model& model, Matrix condition) : model_(model), condition_(std::move(condition)) {}

  State initial() const {
    Tape tape(false);
    Binding p(tape, model_.params);
    Var h = model_.decoder.initial_state(p, tape.constant(condition_));
    return model_.decoder.step(p, {corpus::kBos}, h).value();
  }

  std::vector<double> log_probs(const State& h) const {
    Tape tape(false);
    Binding p(tape, model_.params);
    const Matrix logits = model_.decoder.logits(p, tape.constant(h)).value();
    std::vector<double> out(logits.data().begin(), logits.data().end());
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0.0;
    for (double v : out) z += std::exp(v - mx);
    const double logz = mx + std::log(z);
    for (double& v : out) v -= logz;
    return out;
  }

  State advance(const State& h, std::size_t token) const {
    Tape tape(false);
    Binding p(tape, model_.params);
    return model_.decoder.step(p, {token}, tape.constant(h)).value();
  }

 private:
  const Model& model_;
  Matrix condition_;
};

struct GenerationOptions {
  std::size_t beam = 10;
  std::size_t max_len = 30;
  double damping = 0.9;
  bool use_discourse_rank = true;
  discourse::TreeObjective objective = discourse::TreeObjective::kLogProduct;
};

struct Generated {
  std::vector<std::size_t> tokens;  // without EOS
  bool ended_with_eos = false;
  double log_prob = 0.0;
  Analysis analysis;
};

inline Generated generate_summary(const Model& model, const corpus::Document& doc, const GenerationOptions& opt) {
  Generated out;
  out.analysis = analyze(model, doc, opt.damping, opt.objective);
  DecoderStepper stepper(model, summary_embedding(model, out.analysis, opt.use_discourse_rank));
  reconstructor::BeamOptions bo;
  bo.beam = opt.beam;
  bo.max_len = opt.max_len;
  bo.banned = {corpus::kPad, corpus::kBos};
  const auto hyp = reconstructor::beam_search(stepper, bo);
  out.tokens = hyp.tokens;
  out.ended_with_eos = hyp.ended;
  if (out.ended_with_eos) out.tokens.pop_back();
  out.log_prob = hyp.log_prob;
  return out;
}

inline std::string detokenize(const std::vector<std::size_t>& ids, const corpus::Vocab& vocab) {
  std::string s;
  for (std::size_t id : ids) {
    if (!s.empty()) s += ' ';
    s += vocab.token(id);
  }
  return s;
}

}  // namespace strsum

#endif  // STRSUM_MODEL_HPP
