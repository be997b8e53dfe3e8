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

#ifndef STRSUM_CORPUS_TEXT_HPP
#define STRSUM_CORPUS_TEXT_HPP

#include "strsum/errors.hpp"

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace strsum::corpus {

namespace detail {
inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}
}  // namespace detail

/// Splits after '.', '!' or '?' when followed by whitespace. Throws
/// EmptyDocument if nothing but whitespace remains.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (detail::is_terminal(text[i]) && i + 1 < text.size() && detail::is_space(text[i + 1])) {
      auto piece = detail::trim(text.substr(start, i + 1 - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  auto tail = detail::trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.emplace_back(tail);
  if (out.empty()) throw EmptyDocument();
  return out;
}

/// split_sentences that returns an empty list for blank text.
inline std::vector<std::string> split_sentences_or_empty(std::string_view text) {
  try {
    return split_sentences(text);
  } catch (const EmptyDocument&) {
    return {};
  }
}

inline std::size_t count_sentences(std::string_view text) { return split_sentences_or_empty(text).size(); }

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// into standalone tokens. Inner punctuation ("it's") stays attached.
inline std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && detail::is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !detail::is_space(sentence[j])) ++j;
    if (j > i) {
      std::string chunk(sentence.substr(i, j - i));
      for (char& c : chunk) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      std::size_t lo = 0, hi = chunk.size();
      while (lo < hi && detail::is_punct(chunk[lo])) out.emplace_back(1, chunk[lo++]);
      std::size_t core_end = hi;
      while (core_end > lo && detail::is_punct(chunk[core_end - 1])) --core_end;
      if (core_end > lo) out.push_back(chunk.substr(lo, core_end - lo));
      for (std::size_t k = core_end; k < hi; ++k) out.emplace_back(1, chunk[k]);
    }
    i = j;
  }
  return out;
}

}  // namespace strsum::corpus

#endif  // STRSUM_CORPUS_TEXT_HPP
