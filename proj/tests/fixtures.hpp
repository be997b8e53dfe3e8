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


// Synthetic review corpora for pipeline tests and the acceptance run.

#ifndef STRSUM_TESTS_FIXTURES_HPP
#define STRSUM_TESTS_FIXTURES_HPP

#include "strsum/config.hpp"
#include "strsum/numkit/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace strsum::testing {

inline const std::vector<std::string>& fixture_nouns() {
  static const std::vector<std::string> v{"toy",    "game",  "book",   "phone", "cable",  "lamp",   "chair", "bag",
                                          "watch",  "camera", "kettle", "mouse", "blender", "jacket", "tent",  "helmet"};
  return v;
}

inline const std::vector<std::string>& fixture_adjectives() {
  static const std::vector<std::string> v{"great", "cheap", "sturdy", "flimsy", "fun",   "solid", "bright", "small",
                                          "heavy", "nice",  "loud",   "quiet",  "sharp", "soft",  "warm",   "light"};
  return v;
}

inline void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& r : records) out << r.dump() << "\n";
}

/// 32 documents of 3 to 5 near-identical sentences "the|this <noun> is <adj> ."
/// with reference "<adj> <noun>". Every document has its own (noun, adjective) pair.
inline std::vector<nlohmann::json> overfit_corpus(std::uint64_t seed = 7, std::size_t docs = 32) {
  numkit::Rng rng(seed);
  const auto& nouns = fixture_nouns();
  const auto& adjs = fixture_adjectives();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t n = 0; n < 12; ++n)
    for (std::size_t a = 0; a < 12; ++a) pairs.emplace_back(n, a);
  rng.shuffle(pairs);
  std::vector<nlohmann::json> out;
  for (std::size_t i = 0; i < docs; ++i) {
    const auto& noun = nouns[pairs[i].first];
    const auto& adj = adjs[pairs[i].second];
    std::string text;
    for (std::size_t k = 3 + rng.below(3); k > 0; --k) {
      if (!text.empty()) text += ' ';
      text += std::string(rng.below(2) ? "this " : "the ") + noun + " is " + adj + ".";
    }
    out.push_back({{"id", "d" + std::to_string(i)}, {"text", text}, {"summary", adj + " " + noun}});
  }
  return out;
}

/// Review-like texts of `min_sentences` to `max_sentences` sentences built
/// from a few templates, each with a short summary.
inline std::vector<nlohmann::json> review_corpus(std::size_t count, std::uint64_t seed, std::size_t min_sentences = 5,
                                                 std::size_t max_sentences = 14) {
  numkit::Rng rng(seed);
  const auto& nouns = fixture_nouns();
  const auto& adjs = fixture_adjectives();
  const std::vector<std::string> people{"my son", "my wife", "my daughter", "i", "we", "my friend"};
  const std::vector<std::string> verbs{"loves", "likes", "uses", "returned", "bought", "recommends"};
  const std::vector<std::string> extras{"It arrived on time.", "Shipping was slow!", "Would buy again.",
                                        "Not worth the price.", "Five stars.", "Packaging was damaged?"};
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.below(v.size())]; };
  std::vector<nlohmann::json> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string noun = pick(nouns);
    const std::string adj = pick(adjs);
    const std::size_t n = min_sentences + rng.below(max_sentences - min_sentences + 1);
    std::string text;
    for (std::size_t s = 0; s < n; ++s) {
      std::string sentence;
      switch (rng.below(4)) {
        case 0: sentence = "The " + noun + " is " + adj + "."; break;
        case 1: sentence = pick(people) + " " + pick(verbs) + " this " + noun + "."; break;
        case 2: sentence = "It is " + pick(adjs) + " and " + adj + "."; break;
        default: sentence = pick(extras); break;
      }
      sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
      text += (text.empty() ? "" : " ") + sentence;
    }
    out.push_back({{"id", "rev" + std::to_string(i)}, {"text", text}, {"summary", adj + " " + noun}});
  }
  return out;
}

/// Small model dimensions for fast runs (sentence embedding d = 2 * 16 = 32).
inline void small_model(RunConfig& cfg) {
  cfg.model.embed = 32;
  cfg.model.enc_hidden = 16;
  cfg.model.d_e = 24;
  cfg.model.d_f = 8;
  cfg.model.dec_hidden = 32;
}

}  // namespace strsum::testing

#endif  // STRSUM_TESTS_FIXTURES_HPP
