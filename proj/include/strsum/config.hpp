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


#ifndef STRSUM_CONFIG_HPP
#define STRSUM_CONFIG_HPP

#include "strsum/corpus/document.hpp"
#include "strsum/discourse.hpp"
#include "strsum/errors.hpp"
#include "strsum/model.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace strsum {

/// Everything a run needs. Serialized as JSON next to every checkpoint.
///
/// Schema (all keys optional; missing keys keep their defaults):
///   data: {train, valid, eval, out_dir}          file paths
///   fields: {text, summary, id}                   JSON Lines field names
///   vocab_cap                                     most frequent tokens kept
///   caps: {max_sentences, max_sentence_len, max_reference_len}
///   min_sentences: {train, eval}                  review length filters
///   model: {embed, enc_hidden, d_e, d_f, dec_hidden, tied_output}
///   training: {learning_rate, initial_accumulator, batch_size, clip_norm,
///              max_epochs, seed, beam_size, damping}
///   precision: "f32" | "f64"
///   use_discourse_rank, tree_objective: "log_product" | "sum",
///   max_summary_len, validate_max_docs, pretrained_vectors
struct RunConfig {
  struct Data {
    std::string train, valid, eval;
    std::string out_dir = "run";
    bool operator==(const Data&) const = default;
  };
  struct MinSentences {
    std::size_t train = 10;
    std::size_t eval = 5;
    bool operator==(const MinSentences&) const = default;
  };

  Data data;
  corpus::FieldMap fields;
  std::size_t vocab_cap = 50000;
  corpus::TruncationCaps caps;
  MinSentences min_sentences;
  ModelDims model;  // vocab is filled in from the vocabulary file
  TrainingConfig training;
  Precision precision = Precision::kFloat32;
  bool use_discourse_rank = true;
  discourse::TreeObjective tree_objective = discourse::TreeObjective::kLogProduct;
  std::size_t max_summary_len = 30;
  std::size_t validate_max_docs = 200;
  std::string pretrained_vectors;

  void validate() const {
    if (vocab_cap < 1) throw std::invalid_argument("config: vocab_cap must be >= 1");
    if (caps.max_sentences < 1 || caps.max_sentence_len < 3 || caps.max_reference_len < 1)
      throw std::invalid_argument("config: truncation caps too small (max_sentence_len counts BOS and EOS)");
    if (min_sentences.train < 1 || min_sentences.eval < 1)
      throw std::invalid_argument("config: min_sentences must be >= 1");
    if (model.embed == 0 || model.enc_hidden == 0 || model.dec_hidden == 0 || model.d_e == 0 || model.d_f == 0)
      throw std::invalid_argument("config: model dimensions must be positive");
    if (model.d_e + model.d_f != 2 * model.enc_hidden)
      throw std::invalid_argument("config: d_e + d_f must equal 2 * enc_hidden");
    if (model.tied_output && model.dec_hidden != model.embed)
      throw std::invalid_argument("config: tied output needs dec_hidden == embed");
    training.validate();
    if (max_summary_len < 1) throw std::invalid_argument("config: max_summary_len must be >= 1");
  }

  bool operator==(const RunConfig& o) const {
    auto same_fields = fields.text == o.fields.text && fields.summary == o.fields.summary && fields.id == o.fields.id;
    auto same_caps = caps.max_sentences == o.caps.max_sentences && caps.max_sentence_len == o.caps.max_sentence_len &&
                     caps.max_reference_len == o.caps.max_reference_len;
    return data == o.data && same_fields && vocab_cap == o.vocab_cap && same_caps &&
           min_sentences == o.min_sentences && model == o.model && training == o.training &&
           precision == o.precision && use_discourse_rank == o.use_discourse_rank &&
           tree_objective == o.tree_objective && max_summary_len == o.max_summary_len &&
           validate_max_docs == o.validate_max_docs && pretrained_vectors == o.pretrained_vectors;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& t = c.training;
  return json{
      {"data", {{"train", c.data.train}, {"valid", c.data.valid}, {"eval", c.data.eval}, {"out_dir", c.data.out_dir}}},
      {"fields", {{"text", c.fields.text}, {"summary", c.fields.summary}, {"id", c.fields.id}}},
      {"vocab_cap", c.vocab_cap},
      {"caps",
       {{"max_sentences", c.caps.max_sentences},
        {"max_sentence_len", c.caps.max_sentence_len},
        {"max_reference_len", c.caps.max_reference_len}}},
      {"min_sentences", {{"train", c.min_sentences.train}, {"eval", c.min_sentences.eval}}},
      {"model",
       {{"embed", c.model.embed},
        {"enc_hidden", c.model.enc_hidden},
        {"d_e", c.model.d_e},
        {"d_f", c.model.d_f},
        {"dec_hidden", c.model.dec_hidden},
        {"tied_output", c.model.tied_output}}},
      {"training",
       {{"learning_rate", t.learning_rate},
        {"initial_accumulator", t.initial_accumulator},
        {"batch_size", t.batch_size},
        {"clip_norm", t.clip_norm},
        {"max_epochs", t.max_epochs},
        {"seed", t.seed},
        {"beam_size", t.beam_size},
        {"damping", t.damping}}},
      {"precision", c.precision == Precision::kFloat32 ? "f32" : "f64"},
      {"use_discourse_rank", c.use_discourse_rank},
      {"tree_objective", c.tree_objective == discourse::TreeObjective::kSum ? "sum" : "log_product"},
      {"max_summary_len", c.max_summary_len},
      {"validate_max_docs", c.validate_max_docs},
      {"pretrained_vectors", c.pretrained_vectors},
  };
}

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw InputError(std::string("config key '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace detail

/// Missing keys keep defaults; unknown top-level keys are rejected to catch typos.
inline RunConfig from_json(const nlohmann::json& j) {
  using detail::read_key;
  using detail::section;
  if (!j.is_object()) throw InputError("config must be a JSON object");
  static const std::set<std::string> known{"data", "fields", "vocab_cap", "caps", "min_sentences", "model",
                                           "training", "precision", "use_discourse_rank", "tree_objective",
                                           "max_summary_len", "validate_max_docs", "pretrained_vectors"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw InputError("unknown config key '" + key + "'");
  RunConfig c;
  const auto& data = section(j, "data");
  read_key(data, "train", c.data.train);
  read_key(data, "valid", c.data.valid);
  read_key(data, "eval", c.data.eval);
  read_key(data, "out_dir", c.data.out_dir);
  const auto& fields = section(j, "fields");
  read_key(fields, "text", c.fields.text);
  read_key(fields, "summary", c.fields.summary);
  read_key(fields, "id", c.fields.id);
  read_key(j, "vocab_cap", c.vocab_cap);
  const auto& caps = section(j, "caps");
  read_key(caps, "max_sentences", c.caps.max_sentences);
  read_key(caps, "max_sentence_len", c.caps.max_sentence_len);
  read_key(caps, "max_reference_len", c.caps.max_reference_len);
  const auto& mins = section(j, "min_sentences");
  read_key(mins, "train", c.min_sentences.train);
  read_key(mins, "eval", c.min_sentences.eval);
  const auto& model = section(j, "model");
  read_key(model, "embed", c.model.embed);
  read_key(model, "enc_hidden", c.model.enc_hidden);
  read_key(model, "d_e", c.model.d_e);
  read_key(model, "d_f", c.model.d_f);
  read_key(model, "dec_hidden", c.model.dec_hidden);
  read_key(model, "tied_output", c.model.tied_output);
  const auto& t = section(j, "training");
  read_key(t, "learning_rate", c.training.learning_rate);
  read_key(t, "initial_accumulator", c.training.initial_accumulator);
  read_key(t, "batch_size", c.training.batch_size);
  read_key(t, "clip_norm", c.training.clip_norm);
  read_key(t, "max_epochs", c.training.max_epochs);
  read_key(t, "seed", c.training.seed);
  read_key(t, "beam_size", c.training.beam_size);
  read_key(t, "damping", c.training.damping);
  std::string precision = "f32", objective = "log_product";
  read_key(j, "precision", precision);
  if (precision != "f32" && precision != "f64") throw InputError("config: precision must be \"f32\" or \"f64\"");
  c.precision = precision == "f32" ? Precision::kFloat32 : Precision::kFloat64;
  read_key(j, "use_discourse_rank", c.use_discourse_rank);
  read_key(j, "tree_objective", objective);
  if (objective != "log_product" && objective != "sum")
    throw InputError("config: tree_objective must be \"log_product\" or \"sum\"");
  c.tree_objective = objective == "sum" ? discourse::TreeObjective::kSum : discourse::TreeObjective::kLogProduct;
  read_key(j, "max_summary_len", c.max_summary_len);
  read_key(j, "validate_max_docs", c.validate_max_docs);
  read_key(j, "pretrained_vectors", c.pretrained_vectors);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace strsum

#endif  // STRSUM_CONFIG_HPP
