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

#ifndef STRSUM_RECONSTRUCTOR_HPP
#define STRSUM_RECONSTRUCTOR_HPP

#include "strsum/corpus/vocab.hpp"
#include "strsum/encoder.hpp"
#include "strsum/params.hpp"
#include "strsum/structattn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <tuple>
#include <vector>

namespace strsum::reconstructor {

using encoder::GruLayer;

/// ŝ = tanh((weights · semantic) W_s + b_s). With weights = A's child columns
/// (n+1 rows), row i is the embedding of parent i reconstructed from its
/// expected children; row 0 is the summary embedding.
struct CombinerLayers {
  std::size_t weight = 0;  // W_s, d_e × d_e
  std::size_t bias = 0;    // b_s, 1 × d_e

  static CombinerLayers create(ParamStore& store, std::size_t d_e, numkit::Rng& rng) {
    return {store.add("combiner.W_s", uniform_matrix(d_e, d_e, glorot_bound(d_e, d_e), rng)),
            store.add("combiner.b_s", Matrix(1, d_e))};
  }

  Var apply(Binding& p, Var weights, Var semantic) const {
    using namespace numkit;
    return numkit::tanh(add_bias(matmul(matmul(weights, semantic), p(weight)), p(bias)));
  }
};

/// Child columns 1..n of an (n+1)×(n+1) marginal matrix.
inline Var child_columns(Var marginals) { return numkit::slice_cols(marginals, 1, marginals.cols() - 1); }

/// Parent embeddings ŝ_0..ŝ_n as rows of an (n+1) × d_e matrix.
inline Matrix parent_embeddings(const structattn::Marginals& m, const Matrix& semantic, const ParamStore& store,
                                const CombinerLayers& layers) {
  if (semantic.rows() != m.n()) throw numkit::ShapeMismatch("parent_embeddings: need one semantic row per sentence");
  Tape tape(false);
  Binding p(tape, store);
  return layers.apply(p, child_columns(tape.constant(m.a)), tape.constant(semantic)).value();
}

/// GRU decoder whose initial state is tanh(ŝ W_init + b_init). The output
/// projection is either its own matrix or the transposed word embeddings.
struct DecoderLayers {
  std::size_t init_w = 0, init_b = 0;
  GruLayer gru;
  std::size_t out_w = 0;  // hidden × |V|; unused when tied
  std::size_t out_b = 0;  // 1 × |V|
  std::size_t embedding = 0;
  bool tied = false;

  static DecoderLayers create(ParamStore& store, std::size_t d_e, std::size_t embed, std::size_t hidden,
                              std::size_t vocab, std::size_t embedding, bool tied, numkit::Rng& rng) {
    if (tied && hidden != embed)
      throw numkit::ShapeMismatch("tied output projection needs decoder hidden size == embedding size");
    DecoderLayers d;
    d.embedding = embedding;
    d.tied = tied;
    d.init_w = store.add("decoder.W_init", uniform_matrix(d_e, hidden, glorot_bound(d_e, hidden), rng));
    d.init_b = store.add("decoder.b_init", Matrix(1, hidden));
    d.gru = GruLayer::create(store, "decoder.gru", embed, hidden, rng);
    if (!tied) d.out_w = store.add("decoder.W_out", uniform_matrix(hidden, vocab, glorot_bound(hidden, vocab), rng));
    d.out_b = store.add("decoder.b_out", Matrix(1, vocab));
    return d;
  }

  Var initial_state(Binding& p, Var parent) const {
    return numkit::tanh(numkit::add_bias(numkit::matmul(parent, p(init_w)), p(init_b)));
  }

  Var step(Binding& p, const std::vector<std::size_t>& tokens, Var h) const {
    return gru.step(p, numkit::gather_rows(p(embedding), tokens), h);
  }

  Var logits(Binding& p, Var h) const {
    Var raw = tied ? numkit::matmul_nt(h, p(embedding)) : numkit::matmul(h, p(out_w));
    return numkit::add_bias(raw, p(out_b));
  }
};

/// Σ_i Σ_t -log P(w_i^t | w_i^<t, ŝ_i) with teacher forcing. Row i of
/// `parents` conditions sentence i (BOS ... EOS); returns a 1×1 node.
inline Var reconstruction_nll(Binding& p, const DecoderLayers& dec, Var parents,
                              const std::vector<std::vector<std::size_t>>& sentences) {
  const std::size_t n = sentences.size();
  if (parents.rows() != n) throw numkit::ShapeMismatch("reconstruction_nll: one parent row per sentence");
  std::size_t max_len = 0;
  for (const auto& s : sentences) max_len = std::max(max_len, s.size());
  Var h = dec.initial_state(p, parents);
  Var total = p.tape().constant(Matrix(1, 1));
  for (std::size_t t = 0; t + 1 < max_len; ++t) {
    std::vector<std::size_t> inputs(n, corpus::kPad), targets(n, corpus::kPad);
    std::vector<double> mask(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (t + 1 < sentences[i].size()) {
        inputs[i] = sentences[i][t];
        targets[i] = sentences[i][t + 1];
        mask[i] = 1.0;
      }
    }
    h = numkit::blend_rows(mask, dec.step(p, inputs, h), h);
    total = numkit::add(total, numkit::nll_sum(dec.logits(p, h), std::move(targets), std::move(mask)));
  }
  return total;
}

/// Number of predicted tokens: every position after BOS.
inline std::size_t target_count(const std::vector<std::vector<std::size_t>>& sentences) {
  std::size_t c = 0;
  for (const auto& s : sentences) c += s.empty() ? 0 : s.size() - 1;
  return c;
}

// ---------------------------------------------------------------------------
// Beam search.

struct BeamOptions {
  std::size_t beam = 10;
  std::size_t max_len = 30;
  std::size_t eos = corpus::kEos;
  std::set<std::size_t> banned;  // never generated (e.g. PAD, BOS)
};

struct Hypothesis {
  std::vector<std::size_t> tokens;  // includes EOS when `ended`
  double log_prob = 0.0;
  bool ended = false;
  std::size_t completed_at = 0;  // step at which the hypothesis stopped
};

namespace detail {
/// Orders by higher log-probability, then earlier completion, then token ids.
inline bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.completed_at != b.completed_at) return a.completed_at < b.completed_at;
  return a.tokens < b.tokens;
}

template <typename Model>
Hypothesis search(Model& model, const BeamOptions& opt, std::size_t width) {
  using State = typename Model::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    std::size_t token;
  };
  std::vector<Live> live;
  live.push_back({Hypothesis{}, model.initial()});
  std::vector<Hypothesis> done;
  for (std::size_t step = 0; step < opt.max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const std::vector<double> lp = model.log_probs(live[h].state);
      for (std::size_t k = 0; k < lp.size(); ++k)
        if (!opt.banned.count(k)) cands.push_back({live[h].hyp.log_prob + lp[k], h, k});
    }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        const auto& ta = live[a.parent].hyp.tokens;
                        const auto& tb = live[b.parent].hyp.tokens;
                        if (ta != tb) return ta < tb;
                        return a.token < b.token;
                      });
    std::vector<Live> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = cands[c];
      Hypothesis hyp = live[cand.parent].hyp;
      hyp.tokens.push_back(cand.token);
      hyp.log_prob = cand.score;
      if (cand.token == opt.eos) {
        hyp.ended = true;
        hyp.completed_at = step + 1;
        done.push_back(std::move(hyp));
      } else {
        State s = model.advance(live[cand.parent].state, cand.token);
        next.push_back({std::move(hyp), std::move(s)});
      }
    }
    live = std::move(next);
    // Scores only decrease, so no live hypothesis can overtake a finished one.
    if (!done.empty() && !live.empty()) {
      const auto best_done = std::min_element(done.begin(), done.end(), better);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.hyp.log_prob);
      if (best_done->log_prob >= best_live) live.clear();
    }
  }
  for (auto& l : live) {
    l.hyp.completed_at = opt.max_len;
    done.push_back(std::move(l.hyp));
  }
  return *std::min_element(done.begin(), done.end(), better);
}
}  // namespace detail

/// Highest cumulative log-probability hypothesis, without length
/// normalization. A hypothesis stops at EOS or after max_len tokens. The
/// greedy decode is always among the candidates, so a wider beam never
/// returns a lower-scoring sequence than beam = 1.
///
/// Model must provide `State initial()`, `std::vector<double>
/// log_probs(const State&)` and `State advance(const State&, std::size_t)`.
template <typename Model>
Hypothesis beam_search(Model& model, const BeamOptions& opt) {
  if (opt.beam < 1 || opt.max_len < 1) throw std::invalid_argument("beam_search: beam and max_len must be >= 1");
  Hypothesis best = detail::search(model, opt, opt.beam);
  if (opt.beam > 1) {
    Hypothesis greedy = detail::search(model, opt, 1);
    if (detail::better(greedy, best)) best = std::move(greedy);
  }
  return best;
}

}  // namespace strsum::reconstructor

#endif  // STRSUM_RECONSTRUCTOR_HPP
