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

#include "strsum/corpus/document.hpp"
#include "strsum/corpus/shard.hpp"
#include "strsum/corpus/text.hpp"
#include "strsum/corpus/vocab.hpp"
#include "strsum/numkit/rng.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace strsum::corpus {
namespace {

using Strings = std::vector<std::string>;

TEST(SplitSentences, SplitsOnTerminalPunctuation) {
  EXPECT_EQ(split_sentences("Great toy. My son loves it!"), (Strings{"Great toy.", "My son loves it!"}));
}

TEST(SplitSentences, SingleSegment) {
  EXPECT_EQ(split_sentences("No punctuation here"), (Strings{"No punctuation here"}));
}

TEST(SplitSentences, BlankIsEmptyDocument) {
  EXPECT_THROW(split_sentences("   "), EmptyDocument);
  EXPECT_THROW(split_sentences(""), EmptyDocument);
}

TEST(SplitSentences, KeepsAbbreviationLikeDotsWithoutSpace) {
  EXPECT_EQ(split_sentences("Costs 3.50 dollars. Wow!!  Really?\nYes"),
            (Strings{"Costs 3.50 dollars.", "Wow!!", "Really?", "Yes"}));
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("It's GREAT!"), (Strings{"it's", "great", "!"}));
  EXPECT_EQ(tokenize("a b"), (Strings{"a", "b"}));
  EXPECT_EQ(tokenize("(nice)"), (Strings{"(", "nice", ")"}));
  EXPECT_EQ(tokenize("  fun!!  ..."), (Strings{"fun", "!", "!", ".", ".", "."}));
  EXPECT_TRUE(tokenize("   ").empty());
}

ReviewRecord record(std::string text, std::optional<std::string> summary = std::nullopt, std::string id = "r") {
  return {std::move(id), std::move(text), std::move(summary)};
}

TEST(BuildVocab, FrequencyOrderWithCap) {
  const Vocab v = build_vocab({record("a a b")}, 1);
  EXPECT_EQ(v.size(), kNumSpecials + 1);
  EXPECT_EQ(v.id("a"), kNumSpecials);
  EXPECT_EQ(v.id("b"), kUnk);
}

TEST(BuildVocab, LargeCapKeepsEverything) {
  const Vocab v = build_vocab({record("c b a. b c d")}, 100);
  EXPECT_EQ(v.size(), kNumSpecials + 5);  // a b c d .
  for (const char* t : {"a", "b", "c", "d", "."}) EXPECT_TRUE(v.contains(t)) << t;
}

TEST(BuildVocab, TiesBrokenLexicographically) {
  const Vocab v = build_vocab({record("y x y x")}, 1);
  EXPECT_TRUE(v.contains("x"));
  EXPECT_FALSE(v.contains("y"));
}

TEST(BuildVocab, EmptyCorpusRejected) { EXPECT_THROW(build_vocab({}), InputError); }

TEST(Vocab, FileFormatIsOneTokenPerLineOffsetByFour) {
  const Vocab v = build_vocab({record("b a a c c c")}, 10);
  EXPECT_EQ(v.serialize(), "c\na\nb\n");
  const Vocab back = Vocab::parse(v.serialize());
  EXPECT_EQ(back.size(), v.size());
  EXPECT_EQ(back.id("a"), v.id("a"));
  EXPECT_EQ(back.hash(), v.hash());
  EXPECT_NE(build_vocab({record("x")}).hash(), v.hash());
  EXPECT_THROW(Vocab::parse("a\na\n"), InputError);
}

TEST(FilterCorpus, MinimumSentenceCounts) {
  auto review = [](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += "Sentence number " + std::to_string(i) + ". ";
    return record(s);
  };
  EXPECT_TRUE(filter_corpus({review(9)}, 10).empty());
  EXPECT_EQ(filter_corpus({review(10)}, 10).size(), 1u);
  EXPECT_EQ(filter_corpus({review(5)}, 5).size(), 1u);
  const std::vector<ReviewRecord> all{review(1), review(3), record("  ")};
  EXPECT_EQ(filter_corpus(all, 1).size(), 2u);  // blank text has no sentences
  EXPECT_THROW(filter_corpus(all, 0), std::invalid_argument);
}

TEST(ReadJsonl, ParsesRecordsAndFieldMapping) {
  std::istringstream in(R"({"reviewText": "Nice. Good.", "summary": "ok", "asin": "B1"}
{"reviewText": "Second one"}

)");
  FieldMap fields;
  fields.text = "reviewText";
  fields.id = "asin";
  const auto recs = read_jsonl(in, fields);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, "B1");
  EXPECT_EQ(recs[0].summary, "ok");
  EXPECT_EQ(recs[1].id, "2");
  EXPECT_FALSE(recs[1].summary);
}

TEST(ReadJsonl, ReportsLineNumberOfBadRecord) {
  std::istringstream missing("{\"text\": \"fine\"}\n{\"summary\": \"no text\"}\n");
  try {
    read_jsonl(missing, {});
    FAIL() << "expected MalformedRecord";
  } catch (const MalformedRecord& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream broken("{\"text\": \"fine\"}\n\n{not json\n");
  try {
    read_jsonl(broken, {});
    FAIL() << "expected MalformedRecord";
  } catch (const MalformedRecord& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(MakeDocument, SentinelsTruncationAndReference) {
  const Vocab v = build_vocab({record("the toy is fun. kids like the toy!")}, 100);
  TruncationCaps caps;
  caps.max_sentence_len = 5;  // BOS + 3 tokens + EOS
  caps.max_reference_len = 2;
  const Document d = make_document(record("The toy is fun. Kids like the toy!", "Fun toy overall"), v, caps);
  ASSERT_EQ(d.n(), 2u);
  for (const auto& s : d.sentences) {
    EXPECT_LE(s.size(), caps.max_sentence_len);
    EXPECT_EQ(s.front(), kBos);
    EXPECT_EQ(s.back(), kEos);
    for (auto id : s) EXPECT_LT(id, v.size());
  }
  EXPECT_EQ(d.sentences[0], (std::vector<std::size_t>{kBos, v.id("the"), v.id("toy"), v.id("is"), kEos}));
  ASSERT_TRUE(d.reference);
  EXPECT_EQ(*d.reference, (std::vector<std::size_t>{v.id("fun"), v.id("toy")}));
  EXPECT_EQ(d.reference_text, "Fun toy overall");
}

TEST(MakeDocument, DropsLongestSentencesBeyondCap) {
  const Vocab v = build_vocab({record("a b c d e")}, 100);
  TruncationCaps caps;
  caps.max_sentences = 2;
  const Document d = make_document(record("a b c. a. a b c d. b."), v, caps);
  ASSERT_EQ(d.n(), 2u);
  EXPECT_EQ(d.sentences[0].size(), 4u);  // "a ."
  EXPECT_EQ(d.sentences[1].size(), 4u);  // "b ."
}

TEST(EncodeBatch, SingleDocumentNeedsNoPadding) {
  Document d{"x", {{2, 5, 3}, {2, 6, 3}}, std::nullopt, std::nullopt};
  const Batch b = encode_batch(std::vector<Document>{d});
  EXPECT_EQ(b.max_n, 2u);
  EXPECT_EQ(b.max_len, 3u);
  EXPECT_EQ(b.ids, (std::vector<std::size_t>{2, 5, 3, 2, 6, 3}));
}

TEST(EncodeBatch, PadsShorterDocumentWithMaskedSentence) {
  Document two{"a", {{2, 5, 3}, {2, 3}}, std::nullopt, std::nullopt};
  Document three{"b", {{2, 3}, {2, 6, 7, 3}, {2, 4, 3}}, std::nullopt, std::nullopt};
  const Batch b = encode_batch(std::vector<Document>{two, three});
  EXPECT_EQ(b.max_n, 3u);
  EXPECT_EQ(b.max_len, 4u);
  EXPECT_EQ(b.sentence_counts, (std::vector<std::size_t>{2, 3}));
  for (std::size_t t = 0; t < b.max_len; ++t) {
    EXPECT_EQ(b.at(0, 2, t), kPad);
    EXPECT_FALSE(b.valid(0, 2, t));
  }
  EXPECT_EQ(b.at(0, 1, 2), kPad);
}

TEST(EncodeBatch, DecodeInvertsEncodeOnRandomDocuments) {
  numkit::Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Document> docs(1 + rng.below(5));
    for (auto& d : docs) {
      const std::size_t n = 1 + rng.below(6);
      for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::size_t> sent{kBos};
        for (std::size_t t = rng.below(7); t > 0; --t) sent.push_back(4 + rng.below(50));
        sent.push_back(kEos);
        d.sentences.push_back(sent);
      }
    }
    const auto decoded = decode_batch(encode_batch(docs));
    ASSERT_EQ(decoded.size(), docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) EXPECT_EQ(decoded[i], docs[i].sentences);
  }
}

TEST(Shard, RoundTripAndMagicCheck) {
  std::vector<Document> docs{{"d1", {{2, 4, 3}}, std::vector<std::size_t>{4}, "ref"},
                             {"d2", {{2, 5, 3}, {2, 3}}, std::nullopt, std::nullopt}};
  std::stringstream buf;
  write_shard(buf, docs);
  EXPECT_EQ(buf.str().substr(0, 8), "STRSHARD");
  EXPECT_EQ(read_shard(buf), docs);
  std::stringstream bad("NOTASHARD");
  EXPECT_THROW(read_shard(bad), InputError);
}

}  // namespace
}  // namespace strsum::corpus
