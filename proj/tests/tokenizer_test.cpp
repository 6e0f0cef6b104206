// Copyright 2026 The codematch Authors.
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

#include "codematch/tokenizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "support/oracles.hpp"

namespace codematch::tok {
namespace {

using oracle::exhaustive_best;
using oracle::random_vocab;

std::u32string u32(const std::string& s) { return utf8::decode(s); }

TEST(Viterbi, MatchesExhaustiveSegmentationOnAllShortStrings) {
  Rng rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    const auto v = random_vocab(rng);
    ASSERT_EQ(v.size(), 22);
    std::vector<std::string> strings = {""};
    for (int len = 1; len <= 8; ++len) {
      std::vector<std::string> next;
      for (const auto& s : strings) {
        if (static_cast<int>(s.size()) != len - 1) continue;
        for (char c : std::string("abc")) next.push_back(s + c);
      }
      for (const auto& s : next) {
        const auto ids = segment_best(v, u32(s));
        ASSERT_NEAR(segmentation_score(v, ids), exhaustive_best(v, s), 1e-9) << s;
        std::string joined;
        for (int id : ids) joined += id == kUnkId ? "c" : v.piece(id);
        ASSERT_EQ(joined, s);
      }
      strings.insert(strings.end(), next.begin(), next.end());
    }
  }
}

TEST(Sampling, FrequenciesFollowSharpenedSegmentationProbabilities) {
  const auto v = SubwordVocab::from_pieces({{"a", -1.0}, {"b", -1.5}, {"ab", -1.2}, {"ba", -2.0}, {"aba", -2.5}});
  const std::u32string word = u32("abab");
  const double alpha = 0.5;
  // Exact distribution by enumeration.
  std::map<std::vector<int>, double> exact;
  std::function<void(std::size_t, std::vector<int>, double)> walk = [&](std::size_t pos, std::vector<int> ids, double s) {
    if (pos == word.size()) {
      exact[ids] = std::exp(alpha * s);
      return;
    }
    v.for_each_prefix(std::u32string_view(word).substr(pos), [&](std::size_t len, int id) {
      auto next = ids;
      next.push_back(id);
      walk(pos + len, next, s + v.log_prob(id));
    });
  };
  walk(0, {}, 0.0);
  double z = 0;
  for (auto& [_, p] : exact) z += p;
  Rng rng(5);
  const int n = 40000;
  std::map<std::vector<int>, int> seen;
  for (int i = 0; i < n; ++i) ++seen[segment_sample(v, word, alpha, rng)];
  double chi2 = 0;
  for (auto& [ids, p] : exact) {
    const double expected = n * p / z;
    const double d = seen[ids] - expected;
    chi2 += d * d / expected;
  }
  EXPECT_EQ(seen.size(), exact.size());
  // 99.9% quantile of chi-square with (categories - 1) <= 7 dof is 24.3.
  EXPECT_LT(chi2, 24.3) << exact.size() << " segmentations";
}

TEST(Sampling, SeededEncodeIsReproducibleAndCoversTheText) {
  const auto v = SubwordVocab::from_pieces({{"▁", -3}, {"a", -1.0}, {"b", -1.5}, {"▁ab", -1.2}, {"ab", -2.0}});
  const auto s1 = encode_sample(v, "ab ab abab", 0.2, 9);
  const auto s2 = encode_sample(v, "ab ab abab", 0.2, 9);
  EXPECT_EQ(s1, s2);
  EXPECT_EQ(decode(v, s1), "ab ab abab");
  EXPECT_THROW(encode_sample(v, "ab", 0.0, 1), ValidationError);
}

TEST(Encode, BoundaryMarkersAndUnknowns) {
  const auto v = SubwordVocab::from_pieces({{"▁", -2}, {"▁x", -1}, {"y", -3}});
  const auto seq = encode_best(v, "x  yz");
  EXPECT_EQ(seq.source_len, 5u);
  ASSERT_EQ(seq.ids.size(), 4u);
  EXPECT_EQ(v.piece(seq.ids[0]), "▁x");
  EXPECT_EQ(v.piece(seq.ids[1]), "▁");
  EXPECT_EQ(v.piece(seq.ids[2]), "y");
  EXPECT_EQ(seq.ids[3], kUnkId);
  EXPECT_EQ(decode(v, seq), "x y⁇");
  EXPECT_TRUE(encode_best(v, " \t\n").ids.empty());
  EXPECT_THROW(decode(v, TokenSeq{{99}, 0}), ShapeError);
}

TEST(Vocab, SerializeParseRoundTrip) {
  Rng rng(3);
  const auto v = random_vocab(rng);
  const auto text = v.serialize();
  EXPECT_TRUE(text.starts_with("CMV1\t22\tpad=0\tunk=1\n<pad>\t0\n<unk>\t0\n"));
  const auto back = SubwordVocab::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.content_hash(), v.content_hash());
  for (int id = 0; id < v.size(); ++id) {
    EXPECT_EQ(back.piece(id), v.piece(id));
    EXPECT_EQ(back.log_prob(id), v.log_prob(id));
  }
}

TEST(Vocab, ParseRejectsMalformedFiles) {
  EXPECT_THROW(SubwordVocab::parse("CMV0\t2\tpad=0\tunk=1\n<pad>\t0\n<unk>\t0\n"), FormatError);
  EXPECT_THROW(SubwordVocab::parse("CMV1\t3\tpad=0\tunk=1\n<pad>\t0\n<unk>\t0\n"), FormatError);
  EXPECT_THROW(SubwordVocab::parse("CMV1\t3\tpad=0\tunk=1\n<pad>\t0\n<unk>\t0\nab\tx\n"), FormatError);
  EXPECT_THROW(SubwordVocab::parse("CMV1\t4\tpad=0\tunk=1\n<pad>\t0\n<unk>\t0\nab\t-1\nab\t-2\n"), ValidationError);
  EXPECT_THROW(SubwordVocab::parse("CMV1\t2\tpad=1\tunk=0\n<pad>\t0\n<unk>\t0\n"), FormatError);
}

std::vector<std::string> training_texts() {
  return {"sort a list of tuples by the second element", "sort list in reverse order",
          "convert a list of strings to integers",      "reverse a string",
          "remove duplicates from a list",              "get the last element of a list",
          "sort a dictionary by value",                 "convert string to lowercase"};
}

TEST(Trainer, DeterministicSizedAndSorted) {
  const auto texts = training_texts();
  const auto a = train_unigram(texts, 60, 7);
  const auto b = train_unigram(texts, 60, 7);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(a.size(), 60);
  for (int id = kNumSpecials + 1; id < a.size(); ++id) EXPECT_GE(a.log_prob(id - 1), a.log_prob(id));
  // Every character of the training text is a piece, so no unk appears.
  for (const auto& t : texts) {
    const auto seq = encode_best(a, t);
    for (int id : seq.ids) EXPECT_NE(id, kUnkId);
    EXPECT_EQ(decode(a, seq), t);
  }
}

TEST(Trainer, PrefersFrequentMultiCharacterPieces) {
  const auto v = train_unigram(training_texts(), 60, 7);
  const auto seq = encode_best(v, "list");
  EXPECT_LT(seq.ids.size(), 3u);
}

TEST(Trainer, SmallCorpusKeepsAllCandidates) {
  const std::vector<std::string> texts = {"ab"};
  const auto v = train_unigram(texts, 1000, 1);
  EXPECT_EQ(v.size(), 2 + 3);  // specials + the three characters; no seed reaches count 3
}

TEST(Trainer, RejectsVocabularyBelowAlphabet) {
  const std::vector<std::string> texts = {"abcdef"};
  EXPECT_THROW(train_unigram(texts, 5, 1), ValidationError);
  EXPECT_THROW(train_unigram(std::vector<std::string>{}, 50, 1), ValidationError);
  EXPECT_THROW(train_unigram(std::vector<std::string>{"   "}, 50, 1), ValidationError);
}

TEST(Encode, PrefersTheHigherProbabilitySegmentation) {
  const auto v = SubwordVocab::from_pieces(
      {{"▁", std::log(0.9)}, {"a", std::log(0.5)}, {"b", std::log(0.3)}, {"ab", std::log(0.2)}});
  const auto seq = encode_best(v, "ab");
  ASSERT_EQ(seq.ids.size(), 2u);
  EXPECT_EQ(v.piece(seq.ids[1]), "ab");
  EXPECT_TRUE(encode_best(v, "").ids.empty());
  EXPECT_EQ(decode(v, TokenSeq{}), "");
}

TEST(Sampling, SingleSegmentationIsAlwaysChosen) {
  const auto v = SubwordVocab::from_pieces({{"▁", -1}, {"x", -1}, {"y", -2}});
  const auto best = encode_best(v, "xy");
  for (std::uint64_t seed = 0; seed < 200; ++seed) EXPECT_EQ(encode_sample(v, "xy", 0.2, seed), best);
}

TEST(Sampling, TwoWaySplitFrequencyMatchesLatticeProbability) {
  const auto v = SubwordVocab::from_pieces(
      {{"▁", std::log(0.9)}, {"a", std::log(0.5)}, {"b", std::log(0.3)}, {"ab", std::log(0.2)}});
  const int ab = *v.find("ab");
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto seq = encode_sample(v, "ab", 1.0, seed);
    hits += seq.ids.size() == 2 && seq.ids[1] == ab;
  }
  EXPECT_NEAR(hits / 10000.0, 0.2 / (0.2 + 0.15), 0.03);
}

TEST(Sampling, LargeAlphaConcentratesOnTheBestSegmentation) {
  const auto v = SubwordVocab::from_pieces({{"▁", -0.5}, {"a", -1.0}, {"b", -1.5}, {"ab", -1.2}, {"ba", -2.0},
                                            {"aba", -2.5}, {"bab", -2.2}});
  const auto best = encode_best(v, "ababab");
  int same = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) same += encode_sample(v, "ababab", 100.0, seed) == best;
  EXPECT_GE(same, 990);
}

TEST(Trainer, SingleSymbolCorpus) {
  const std::vector<std::string> texts = {"aaaa"};
  const auto v = train_unigram(texts, 50, 1);
  const auto a = v.find("a");
  ASSERT_TRUE(a.has_value());
  const auto seq = encode_best(v, "aaaa");
  EXPECT_EQ(decode(v, seq), "aaaa");
  for (int id : seq.ids) EXPECT_NE(id, kUnkId);
}

}  // namespace
}  // namespace codematch::tok
