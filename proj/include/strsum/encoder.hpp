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

#ifndef STRSUM_ENCODER_HPP
#define STRSUM_ENCODER_HPP

#include "strsum/corpus/vocab.hpp"
#include "strsum/errors.hpp"
#include "strsum/params.hpp"

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace strsum::encoder {

using numkit::ShapeMismatch;

inline constexpr double kInitBound = 0.08;

/// Gated recurrent unit with reset/update gates and tanh candidate:
///   z = σ(x Wz + h Uz + bz)
///   r = σ(x Wr + h Ur + br)
///   n = tanh(x Wn + (r ⊙ h) Un + bn)
///   h' = (1 - z) ⊙ n + z ⊙ h
/// Inputs and states are row vectors, one row per sequence.
struct GruLayer {
  std::size_t input = 0, hidden = 0;
  std::size_t wz = 0, wr = 0, wn = 0;
  std::size_t uz = 0, ur = 0, un = 0;
  std::size_t bz = 0, br = 0, bn = 0;

  static GruLayer create(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                         numkit::Rng& rng) {
    GruLayer g;
    g.input = input;
    g.hidden = hidden;
    g.wz = store.add(prefix + ".Wz", uniform_matrix(input, hidden, kInitBound, rng));
    g.wr = store.add(prefix + ".Wr", uniform_matrix(input, hidden, kInitBound, rng));
    g.wn = store.add(prefix + ".Wn", uniform_matrix(input, hidden, kInitBound, rng));
    g.uz = store.add(prefix + ".Uz", uniform_matrix(hidden, hidden, kInitBound, rng));
    g.ur = store.add(prefix + ".Ur", uniform_matrix(hidden, hidden, kInitBound, rng));
    g.un = store.add(prefix + ".Un", uniform_matrix(hidden, hidden, kInitBound, rng));
    g.bz = store.add(prefix + ".bz", Matrix(1, hidden));
    g.br = store.add(prefix + ".br", Matrix(1, hidden));
    g.bn = store.add(prefix + ".bn", Matrix(1, hidden));
    return g;
  }

  Var step(Binding& p, Var x, Var h) const {
    using namespace numkit;
    Var z = sigmoid(add_bias(add(matmul(x, p(wz)), matmul(h, p(uz))), p(bz)));
    Var r = sigmoid(add_bias(add(matmul(x, p(wr)), matmul(h, p(ur))), p(br)));
    Var n = numkit::tanh(add_bias(add(matmul(x, p(wn)), matmul(hadamard(r, h), p(un))), p(bn)));
    return add(n, hadamard(z, sub(h, n)));
  }
};

struct EncoderLayers {
  std::size_t embedding = 0;
  GruLayer forward;
  GruLayer backward;

  std::size_t output_dim() const { return forward.hidden + backward.hidden; }
};

/// Drops the BOS/EOS sentinels of an encoded sentence.
inline std::vector<std::size_t> inner_tokens(const std::vector<std::size_t>& sentence) {
  auto first = sentence.begin();
  auto last = sentence.end();
  if (first != last && *first == corpus::kBos) ++first;
  if (first != last && *(last - 1) == corpus::kEos) --last;
  return {first, last};
}

/// Embeds every sentence (token ids without sentinels) as one row of the
/// result: the element-wise max over time of [forward state; backward state].
/// Sentences are padded to a common length; padded steps leave states
/// untouched and are excluded from pooling.
inline Var encode_sentences(Binding& p, const EncoderLayers& enc, const std::vector<std::vector<std::size_t>>& sentences) {
  Tape& tape = p.tape();
  const std::size_t n = sentences.size();
  std::size_t max_len = 0;
  for (const auto& s : sentences) max_len = std::max(max_len, s.size());
  if (n == 0) throw ShapeMismatch("encode_sentences: no sentences");
  if (max_len == 0) return tape.constant(Matrix(n, enc.output_dim()));

  std::vector<std::vector<bool>> valid(n, std::vector<bool>(max_len, false));
  std::vector<Var> inputs;
  std::vector<std::vector<double>> masks;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<std::size_t> ids(n, corpus::kPad);
    std::vector<double> mask(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (t < sentences[i].size()) {
        ids[i] = sentences[i][t];
        mask[i] = 1.0;
        valid[i][t] = true;
      }
    }
    inputs.push_back(numkit::gather_rows(p(enc.embedding), std::move(ids)));
    masks.push_back(std::move(mask));
  }

  std::vector<Var> fwd(max_len), bwd(max_len);
  Var h = tape.constant(Matrix(n, enc.forward.hidden));
  for (std::size_t t = 0; t < max_len; ++t) {
    h = numkit::blend_rows(masks[t], enc.forward.step(p, inputs[t], h), h);
    fwd[t] = h;
  }
  h = tape.constant(Matrix(n, enc.backward.hidden));
  for (std::size_t t = max_len; t-- > 0;) {
    h = numkit::blend_rows(masks[t], enc.backward.step(p, inputs[t], h), h);
    bwd[t] = h;
  }
  return numkit::concat_cols(numkit::max_pool(fwd, valid), numkit::max_pool(bwd, valid));
}

/// Semantic and structure parts of sentence embeddings.
struct SplitEmbedding {
  Matrix semantic;
  Matrix structure;
};

/// Prefix of width d_e is semantic, the rest structure. Both parts must be non-empty.
inline SplitEmbedding split_embedding(const Matrix& s, std::size_t d_e) {
  if (d_e == 0 || d_e >= s.cols())
    throw ShapeMismatch("split_embedding: need 0 < d_e < " + std::to_string(s.cols()));
  SplitEmbedding out{Matrix(s.rows(), d_e), Matrix(s.rows(), s.cols() - d_e)};
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) (j < d_e ? out.semantic(i, j) : out.structure(i, j - d_e)) = s(i, j);
  return out;
}

inline std::pair<Var, Var> split_embedding(Var s, std::size_t d_e) {
  if (d_e == 0 || d_e >= s.cols())
    throw ShapeMismatch("split_embedding: need 0 < d_e < " + std::to_string(s.cols()));
  return {numkit::slice_cols(s, 0, d_e), numkit::slice_cols(s, d_e, s.cols() - d_e)};
}

/// Loads "token v1 ... vk" lines into the rows of known tokens; returns the
/// number of rows replaced. Lines with the wrong width are rejected.
inline std::size_t load_pretrained_vectors(std::istream& in, const corpus::Vocab& vocab, Matrix& embedding) {
  std::size_t loaded = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    // fastText headers ("count dim") have a single trailing number.
    if (lineno == 1 && values.size() == 1) continue;
    if (values.size() != embedding.cols())
      throw InputError("pretrained vectors line " + std::to_string(lineno) + ": expected " +
                       std::to_string(embedding.cols()) + " values, got " + std::to_string(values.size()));
    if (!vocab.contains(token)) continue;
    auto row = embedding.row(vocab.id(token));
    std::copy(values.begin(), values.end(), row.begin());
    ++loaded;
  }
  return loaded;
}

inline std::size_t load_pretrained_vectors(const std::string& path, const corpus::Vocab& vocab, Matrix& embedding) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pretrained vectors " + path);
  return load_pretrained_vectors(in, vocab, embedding);
}

}  // namespace strsum::encoder

#endif  // STRSUM_ENCODER_HPP
