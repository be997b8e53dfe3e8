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

#ifndef STRSUM_CORPUS_VOCAB_HPP
#define STRSUM_CORPUS_VOCAB_HPP

#include "strsum/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace strsum::corpus {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kUnk = 1;
inline constexpr std::size_t kBos = 2;
inline constexpr std::size_t kEos = 3;
inline constexpr std::size_t kNumSpecials = 4;

/// Token <-> id bijection. Ids 0..3 are PAD, UNK, BOS, EOS; the rest are
/// ordered by descending training frequency, ties broken lexicographically.
class Vocab {
 public:
  Vocab() : tokens_{"<pad>", "<unk>", "<s>", "</s>"} { reindex(); }

  /// Keeps the `cap` most frequent tokens.
  static Vocab from_counts(const std::map<std::string, std::size_t>& counts, std::size_t cap) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocab v;
    for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) v.tokens_.push_back(ranked[i].first);
    v.reindex();
    return v;
  }

  /// Inverse of serialize(): one token per line, line k holds id k + 4.
  static Vocab parse(std::string_view text) {
    Vocab v;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      v.tokens_.emplace_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
    v.reindex();
    if (v.index_.size() != v.tokens_.size() - kNumSpecials) throw InputError("vocabulary file contains duplicate tokens");
    return v;
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open vocabulary file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  std::string serialize() const {
    std::string out;
    for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out += '\n';
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary file " + path);
    out << serialize();
  }

  /// FNV-1a over the serialized form; checkpoints record it.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace strsum::corpus

#endif  // STRSUM_CORPUS_VOCAB_HPP
