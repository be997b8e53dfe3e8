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

#ifndef STRSUM_CORPUS_DOCUMENT_HPP
#define STRSUM_CORPUS_DOCUMENT_HPP

#include "strsum/corpus/text.hpp"
#include "strsum/corpus/vocab.hpp"
#include "strsum/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace strsum::corpus {

struct ReviewRecord {
  std::string id;
  std::string text;
  std::optional<std::string> summary;
};

/// JSON field names for the record members (Amazon dumps use "reviewText").
struct FieldMap {
  std::string text = "text";
  std::string summary = "summary";
  std::string id = "id";
};

/// Reads one record per line; blank lines are skipped. Records without an id
/// field get "<line number>". Throws MalformedRecord with the line number.
inline std::vector<ReviewRecord> read_jsonl(std::istream& in, const FieldMap& fields,
                                            const std::string& source = "<input>") {
  std::vector<ReviewRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw MalformedRecord(source, lineno, "record is not a JSON object");
    auto text = j.find(fields.text);
    if (text == j.end() || !text->is_string())
      throw MalformedRecord(source, lineno, "missing string field '" + fields.text + "'");
    ReviewRecord r;
    r.text = text->get<std::string>();
    if (detail::trim(r.text).empty()) throw MalformedRecord(source, lineno, "empty text");
    if (auto s = j.find(fields.summary); s != j.end() && s->is_string()) r.summary = s->get<std::string>();
    if (auto id = j.find(fields.id); id != j.end() && !id->is_null())
      r.id = id->is_string() ? id->get<std::string>() : id->dump();
    else
      r.id = std::to_string(lineno);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ReviewRecord> read_jsonl_file(const std::string& path, const FieldMap& fields) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_jsonl(in, fields, path);
}

/// Keeps records with at least `min_sentences` sentences.
inline std::vector<ReviewRecord> filter_corpus(const std::vector<ReviewRecord>& records,
                                               std::size_t min_sentences) {
  if (min_sentences < 1) throw std::invalid_argument("filter_corpus: min_sentences must be >= 1");
  std::vector<ReviewRecord> out;
  for (const auto& r : records)
    if (count_sentences(r.text) >= min_sentences) out.push_back(r);
  return out;
}

/// Vocabulary over the review texts (not summaries).
inline Vocab build_vocab(const std::vector<ReviewRecord>& records, std::size_t cap = 50000) {
  if (records.empty()) throw InputError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records)
    for (const auto& s : split_sentences(r.text))
      for (auto& tok : tokenize(s)) ++counts[tok];
  return Vocab::from_counts(counts, cap);
}

struct TruncationCaps {
  std::size_t max_sentences = 40;
  std::size_t max_sentence_len = 50;  // including BOS/EOS
  std::size_t max_reference_len = 20;
};

struct Document {
  std::string id;
  /// Each sentence is BOS w1 .. wl EOS.
  std::vector<std::vector<std::size_t>> sentences;
  std::optional<std::vector<std::size_t>> reference;  // no sentinels
  std::optional<std::string> reference_text;

  std::size_t n() const { return sentences.size(); }
  bool operator==(const Document&) const = default;
};

inline std::vector<std::size_t> encode_tokens(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

/// Tokenizes and encodes a record. Over-long documents drop their longest
/// sentences first (later ones on ties) until max_sentences remain; sentences
/// and references keep their prefix.
inline Document make_document(const ReviewRecord& record, const Vocab& vocab, const TruncationCaps& caps) {
  if (caps.max_sentence_len < 3 || caps.max_sentences < 1) throw std::invalid_argument("make_document: caps too small");
  std::vector<std::vector<std::size_t>> inner;
  for (const auto& s : split_sentences(record.text)) {
    auto ids = encode_tokens(tokenize(s), vocab);
    if (ids.empty()) continue;
    if (ids.size() > caps.max_sentence_len - 2) ids.resize(caps.max_sentence_len - 2);
    inner.push_back(std::move(ids));
  }
  if (inner.empty()) throw EmptyDocument();
  if (inner.size() > caps.max_sentences) {
    std::vector<std::size_t> order(inner.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (inner[a].size() != inner[b].size()) return inner[a].size() > inner[b].size();
      return a > b;
    });
    std::vector<bool> drop(inner.size(), false);
    for (std::size_t k = 0; k < inner.size() - caps.max_sentences; ++k) drop[order[k]] = true;
    std::vector<std::vector<std::size_t>> kept;
    for (std::size_t i = 0; i < inner.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(inner[i]));
    inner = std::move(kept);
  }
  Document d;
  d.id = record.id;
  for (auto& ids : inner) {
    std::vector<std::size_t> s;
    s.reserve(ids.size() + 2);
    s.push_back(kBos);
    s.insert(s.end(), ids.begin(), ids.end());
    s.push_back(kEos);
    d.sentences.push_back(std::move(s));
  }
  if (record.summary) {
    std::vector<std::string> toks;
    for (const auto& s : split_sentences_or_empty(*record.summary))
      for (auto& t : tokenize(s)) toks.push_back(std::move(t));
    if (toks.size() > caps.max_reference_len) toks.resize(caps.max_reference_len);
    if (!toks.empty()) {
      d.reference = encode_tokens(toks, vocab);
      d.reference_text = *record.summary;
    }
  }
  return d;
}

/// Padded [batch × max_n × max_len] id tensor plus the masks needed to undo it.
struct Batch {
  std::size_t batch = 0;
  std::size_t max_n = 0;
  std::size_t max_len = 0;
  std::vector<std::size_t> ids;               // row-major, PAD-filled
  std::vector<std::size_t> sentence_counts;   // per document
  std::vector<std::size_t> sentence_lengths;  // batch × max_n, 0 for padding sentences

  std::size_t at(std::size_t b, std::size_t s, std::size_t t) const { return ids[(b * max_n + s) * max_len + t]; }
  std::size_t length(std::size_t b, std::size_t s) const { return sentence_lengths[b * max_n + s]; }
  bool valid(std::size_t b, std::size_t s, std::size_t t) const {
    return s < sentence_counts[b] && t < length(b, s);
  }
};

inline Batch encode_batch(const std::vector<const Document*>& docs, std::size_t pad_id = kPad) {
  if (docs.empty()) throw std::invalid_argument("encode_batch: empty batch");
  Batch b;
  b.batch = docs.size();
  for (const Document* d : docs) {
    b.max_n = std::max(b.max_n, d->n());
    for (const auto& s : d->sentences) b.max_len = std::max(b.max_len, s.size());
  }
  b.ids.assign(b.batch * b.max_n * b.max_len, pad_id);
  b.sentence_lengths.assign(b.batch * b.max_n, 0);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    b.sentence_counts.push_back(docs[i]->n());
    for (std::size_t s = 0; s < docs[i]->n(); ++s) {
      const auto& sent = docs[i]->sentences[s];
      b.sentence_lengths[i * b.max_n + s] = sent.size();
      std::copy(sent.begin(), sent.end(), b.ids.begin() + (i * b.max_n + s) * b.max_len);
    }
  }
  return b;
}

inline Batch encode_batch(const std::vector<Document>& docs, std::size_t pad_id = kPad) {
  std::vector<const Document*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  return encode_batch(ptrs, pad_id);
}

/// Unpadded sentences of every document in the batch.
inline std::vector<std::vector<std::vector<std::size_t>>> decode_batch(const Batch& b) {
  std::vector<std::vector<std::vector<std::size_t>>> out(b.batch);
  for (std::size_t i = 0; i < b.batch; ++i) {
    for (std::size_t s = 0; s < b.sentence_counts[i]; ++s) {
      const std::size_t off = (i * b.max_n + s) * b.max_len;
      out[i].emplace_back(b.ids.begin() + off, b.ids.begin() + off + b.length(i, s));
    }
  }
  return out;
}

}  // namespace strsum::corpus

#endif  // STRSUM_CORPUS_DOCUMENT_HPP
