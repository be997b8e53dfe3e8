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

#ifndef STRSUM_EVALKIT_HPP
#define STRSUM_EVALKIT_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace strsum::evalkit {

class EmptyReference : public std::invalid_argument {
 public:
  EmptyReference() : std::invalid_argument("ROUGE: reference is empty") {}
};

struct RougeScores {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

inline double f1(double overlap, std::size_t hyp_count, std::size_t ref_count) {
  if (hyp_count == 0 || ref_count == 0) return 0.0;
  const double p = overlap / static_cast<double>(hyp_count);
  const double r = overlap / static_cast<double>(ref_count);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

template <typename Token>
std::map<std::vector<Token>, std::size_t> ngram_counts(const std::vector<Token>& seq, std::size_t n) {
  std::map<std::vector<Token>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<Token>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

/// ROUGE-N F1 with clipped n-gram overlap.
template <typename Token>
double rouge_n(const std::vector<Token>& hyp, const std::vector<Token>& ref, std::size_t n) {
  if (ref.empty()) throw EmptyReference();
  const auto h = ngram_counts(hyp, n);
  const auto r = ngram_counts(ref, n);
  std::size_t overlap = 0;
  for (const auto& [gram, c] : h)
    if (auto it = r.find(gram); it != r.end()) overlap += std::min(c, it->second);
  const std::size_t hn = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  const std::size_t rn = ref.size() >= n ? ref.size() - n + 1 : 0;
  return f1(static_cast<double>(overlap), hn, rn);
}

/// Longest common subsequence length, two-row dynamic program.
template <typename Token>
std::size_t lcs_length(const std::vector<Token>& a, const std::vector<Token>& b) {
  const std::vector<Token>& outer = a.size() >= b.size() ? a : b;
  const std::vector<Token>& inner = a.size() >= b.size() ? b : a;
  std::vector<std::size_t> prev(inner.size() + 1, 0), cur(inner.size() + 1, 0);
  for (const Token& x : outer) {
    for (std::size_t j = 1; j <= inner.size(); ++j)
      cur[j] = x == inner[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[inner.size()];
}

template <typename Token>
double rouge_l(const std::vector<Token>& hyp, const std::vector<Token>& ref) {
  if (ref.empty()) throw EmptyReference();
  return f1(static_cast<double>(lcs_length(hyp, ref)), hyp.size(), ref.size());
}

template <typename Token>
RougeScores rouge_scores(const std::vector<Token>& hyp, const std::vector<Token>& ref) {
  return {rouge_n(hyp, ref, 1), rouge_n(hyp, ref, 2), rouge_l(hyp, ref)};
}

/// Per-document scores and their arithmetic means.
struct RougeReport {
  std::vector<std::string> ids;
  std::vector<RougeScores> per_document;
  RougeScores mean;

  void add(std::string id, const RougeScores& s) {
    ids.push_back(std::move(id));
    per_document.push_back(s);
    sum_.r1 += s.r1;
    sum_.r2 += s.r2;
    sum_.rl += s.rl;
    const double k = static_cast<double>(per_document.size());
    mean = {sum_.r1 / k, sum_.r2 / k, sum_.rl / k};
  }

 private:
  RougeScores sum_;
};

}  // namespace strsum::evalkit

#endif  // STRSUM_EVALKIT_HPP
