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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "codematch/checkpoint.hpp"
#include "codematch/train_eval.hpp"
#include "support/fixture.hpp"
#include "support/oracles.hpp"

namespace codematch::train {
namespace {

using corpus::Split;

TEST(RankOfGold, Examples) {
  const std::vector<double> s = {0.1, 0.9, 0.3};
  EXPECT_EQ(rank_of_gold(std::span<const double>(s), 1), 1);
  EXPECT_EQ(rank_of_gold(std::span<const double>(s), 0), 3);
  const std::vector<double> flat(500, 0.5);
  EXPECT_EQ(rank_of_gold(std::span<const double>(flat), 499), 500);
  EXPECT_EQ(rank_of_gold(std::span<const double>(flat), 0), 1);
  EXPECT_THROW(rank_of_gold(std::span<const double>(s), 3), ValidationError);
}

using oracle::sorted_rank;

TEST(RankOfGold, MatchesSortOracleWithTies) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> s(n);
    // Few distinct values so ties are common.
    for (auto& v : s) v = static_cast<double>(rng.below(5)) / 4.0;
    const std::size_t gold = rng.below(n);
    EXPECT_EQ(rank_of_gold(std::span<const double>(s), gold), sorted_rank(s, gold));
  }
}

TEST(RankOfGold, InvariantUnderAffineIncrease) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(20), t(20);
    for (auto& v : s) v = rng.uniform(-1, 1);
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return 2 * v - 1; });
    for (std::size_t g = 0; g < s.size(); ++g) {
      EXPECT_EQ(rank_of_gold(std::span<const double>(s), g), rank_of_gold(std::span<const double>(t), g));
    }
  }
}

TEST(Metrics, Examples) {
  const auto m = metrics_from_ranks({1, 2, 4});
  EXPECT_NEAR(m.mrr, (1 + 0.5 + 0.25) / 3, 1e-15);
  EXPECT_NEAR(m.recall_at.at(1), 1.0 / 3, 1e-15);
  EXPECT_EQ(m.recall_at.at(5), 1.0);
  const auto all = metrics_from_ranks({1, 1, 1});
  EXPECT_EQ(all.mrr, 1.0);
  for (int k : kRecallCutoffs) EXPECT_EQ(all.recall_at.at(k), 1.0);
  EXPECT_THROW(metrics_from_ranks({}), ValidationError);
  EXPECT_THROW(metrics_from_ranks({0}), ValidationError);
}

TEST(Metrics, MatchBruteForceOverScoreMatrices) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<std::vector<double>> scores(n, std::vector<double>(n));
    for (auto& row : scores) {
      for (auto& v : row) v = static_cast<double>(rng.below(8));
    }
    std::vector<int> ranks;
    double rr = 0;
    std::map<int, int> hits;
    for (std::size_t q = 0; q < n; ++q) {
      ranks.push_back(rank_of_gold(std::span<const double>(scores[q]), q));
      const int r = sorted_rank(scores[q], q);
      rr += 1.0 / r;
      for (int k : kRecallCutoffs) hits[k] += r <= k;
    }
    const auto m = metrics_from_ranks(ranks);
    EXPECT_NEAR(m.mrr, rr / n, 1e-12);
    double prev = 0;
    for (int k : kRecallCutoffs) {
      EXPECT_NEAR(m.recall_at.at(k), static_cast<double>(hits[k]) / n, 1e-12);
      EXPECT_GE(m.recall_at.at(k), prev);
      prev = m.recall_at.at(k);
    }
    EXPECT_LE(prev, 1.0);
  }
}

TEST(Config, DefaultsAndOverrides) {
  const auto d = config_from_toml("");
  EXPECT_EQ(d.model, match::ModelKind::kMpCat);
  EXPECT_EQ(d.epochs, 100);
  EXPECT_EQ(d.batch_size, 32);
  EXPECT_EQ(d.negatives, 5);
  EXPECT_DOUBLE_EQ(d.margin, 0.05);
  EXPECT_DOUBLE_EQ(d.lr, 1e-3);
  EXPECT_DOUBLE_EQ(d.alpha, 0.2);
  EXPECT_EQ(d.dims.embed, 128);
  EXPECT_EQ(d.dims.perspectives, 10);
  const auto c = config_from_toml(R"(
model = "cat"
epochs = 3
margin = 0.1
[dims]
hidden = 16
[seeds]
init = 99
[data]
corpus = "c.cmc"
)");
  EXPECT_EQ(c.model, match::ModelKind::kCat);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.dims.hidden, 16);
  EXPECT_EQ(c.dims.embed, 128);
  EXPECT_EQ(c.seeds.init, 99u);
  EXPECT_EQ(c.data.corpus, "c.cmc");
}

TEST(Config, EchoRoundTrips) {
  auto c = config_from_toml("model = \"mp\"\nepochs = 7\n[pretrain]\nwindow = 2\n");
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(j["model"], "mp");
  EXPECT_EQ(j["pretrain"]["window"], 2);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(config_from_toml("margin = 0.0"), ValidationError);
  EXPECT_THROW(config_from_toml("epochs = 0"), ValidationError);
  EXPECT_THROW(config_from_toml("epoch = 3"), ValidationError);
  EXPECT_THROW(config_from_toml("[dims]\nwidth = 3"), ValidationError);
  EXPECT_THROW(config_from_toml("epochs = \"ten\""), ValidationError);
  EXPECT_THROW(config_from_toml("model = \"rnn\""), ValidationError);
  EXPECT_THROW(config_from_toml("epochs = "), ParseError);
}

TEST(Config, ResolvesRelativeDataPaths) {
  TrainConfig c;
  c.base_dir = "/cfg";
  EXPECT_EQ(c.resolve("v.cmv"), "/cfg/v.cmv");
  EXPECT_EQ(c.resolve("/abs/v.cmv"), "/abs/v.cmv");
  EXPECT_EQ(c.resolve(""), "");
}

class FixtureTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new std::vector<pipeline::PreparedSample>(fixture::prepared(Split::kTrain));
    test_ = new std::vector<pipeline::PreparedSample>(fixture::prepared(Split::kTest));
    vocabs_ = new pipeline::Vocabs(fixture::vocabs(*train_));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete test_;
    delete vocabs_;
  }
  static std::vector<pipeline::PreparedSample>* train_;
  static std::vector<pipeline::PreparedSample>* test_;
  static pipeline::Vocabs* vocabs_;
};

std::vector<pipeline::PreparedSample>* FixtureTest::train_ = nullptr;
std::vector<pipeline::PreparedSample>* FixtureTest::test_ = nullptr;
pipeline::Vocabs* FixtureTest::vocabs_ = nullptr;

TEST_F(FixtureTest, FixtureParsesAndEncodes) {
  EXPECT_EQ(train_->size(), 50u);
  EXPECT_EQ(test_->size(), 25u);
  for (const auto& s : *train_) {
    EXPECT_FALSE(s.ast_fallback) << s.code;
    const auto e = pipeline::encode_best(*vocabs_, s);
    EXPECT_EQ(std::count(e.code.ids.begin(), e.code.ids.end(), tok::kUnkId), 0) << s.code;
    EXPECT_EQ(tok::decode(vocabs_->text, e.text), s.description);
  }
}

TEST_F(FixtureTest, SampledEncodingIsSeededPerChannel) {
  const auto& s = (*train_)[3];
  const auto a = pipeline::encode_sampled(*vocabs_, s, 0.2, 7, 0);
  const auto b = pipeline::encode_sampled(*vocabs_, s, 0.2, 7, 0);
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(tok::decode(vocabs_->code, a.code), tok::decode(vocabs_->code, pipeline::encode_best(*vocabs_, s).code));
  bool differs = false;
  for (int epoch = 1; epoch < 20 && !differs; ++epoch) {
    differs = pipeline::encode_sampled(*vocabs_, s, 0.2, 7, epoch).code != a.code;
  }
  EXPECT_TRUE(differs);
}

TEST_F(FixtureTest, ZeroLearningRateLeavesParametersUnchanged) {
  auto cfg = fixture::tiny_config(match::ModelKind::kCat, 3);
  cfg.lr = 0;
  cfg.subword_sampling = false;
  const auto init = initial_params(cfg, *vocabs_, *train_);
  const auto r = train(cfg, *vocabs_, *train_);
  EXPECT_EQ(r.params, init);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (const auto& e : r.epochs) EXPECT_NEAR(e.mean_loss, r.epochs[0].mean_loss, 1e-6);
}

TEST_F(FixtureTest, TrainingIsByteDeterministic) {
  for (auto kind : {match::ModelKind::kCt, match::ModelKind::kMpCat}) {
    const auto cfg = fixture::tiny_config(kind, 2);
    const auto a = ckpt::serialize(make_checkpoint(cfg, *vocabs_, train(cfg, *vocabs_, *train_).params));
    const auto b = ckpt::serialize(make_checkpoint(cfg, *vocabs_, train(cfg, *vocabs_, *train_).params));
    EXPECT_EQ(fnv1a64(a), fnv1a64(b));
    EXPECT_TRUE(a == b);
    auto other = cfg;
    other.seeds.shuffle = 77;
    EXPECT_FALSE(a == ckpt::serialize(make_checkpoint(other, *vocabs_, train(other, *vocabs_, *train_).params)));
  }
}

TEST_F(FixtureTest, TrainingReducesLoss) {
  auto cfg = fixture::tiny_config(match::ModelKind::kCt, 15);
  cfg.lr = 1e-2;
  const auto r = train(cfg, *vocabs_, *train_);
  EXPECT_LT(r.epochs.back().mean_loss, r.epochs.front().mean_loss);
}

TEST_F(FixtureTest, DivergenceIsReported) {
  auto cfg = fixture::tiny_config(match::ModelKind::kCt, 20);
  cfg.lr = 1e36;
  cfg.margin = 2.5;
  try {
    train(cfg, *vocabs_, *train_);
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST_F(FixtureTest, EvaluateMatchesDirectScoring) {
  for (auto kind : {match::ModelKind::kCt, match::ModelKind::kMp}) {
    const auto cfg = fixture::tiny_config(kind, 1);
    const auto params = train(cfg, *vocabs_, *train_).params;
    const match::Model<float> model(cfg.model, cfg.dims);
    const std::span<const pipeline::PreparedSample> pool(test_->data(), 12);
    const auto m = evaluate(model, params, *vocabs_, pool);
    ASSERT_EQ(m.ranks.size(), 12u);
    for (std::size_t q = 0; q < pool.size(); ++q) {
      const auto text = pipeline::encode_best(*vocabs_, pool[q]).text;
      std::vector<double> s;
      for (const auto& c : pool) {
        auto e = pipeline::encode_best(*vocabs_, c);
        e.text = text;
        s.push_back(model.score(params, e).score);
      }
      EXPECT_EQ(m.ranks[q], sorted_rank(s, q)) << "query " << q;
    }
    EXPECT_THROW(evaluate(model, params, *vocabs_, {}), ValidationError);
  }
}

TEST_F(FixtureTest, ReportShape) {
  const auto m = metrics_from_ranks({1, 3});
  const auto r = report_json("ct", m, to_json(TrainConfig{}), std::nullopt);
  EXPECT_TRUE(r["runtime_seconds"].is_null());
  EXPECT_EQ(r["ranks"], nlohmann::json::array({1, 3}));
  EXPECT_EQ(r["recall"]["5"], 1.0);
  EXPECT_EQ(report_json("ct", m, {}, 1.5)["runtime_seconds"], 1.5);
}

TEST_F(FixtureTest, CheckpointRoundTrip) {
  const auto cfg = fixture::tiny_config(match::ModelKind::kMpCat, 1);
  const auto c = make_checkpoint(cfg, *vocabs_, train(cfg, *vocabs_, *train_).params);
  const auto bytes = ckpt::serialize(c);
  const auto back = ckpt::deserialize(bytes, "mem");
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.code_vocab.serialize(), c.code_vocab.serialize());
  EXPECT_EQ(ckpt::serialize(back), bytes);
  EXPECT_EQ(model_from_checkpoint(back).kind(), match::ModelKind::kMpCat);

  auto bad = bytes;
  bad[0] = 'X';
  try {
    ckpt::deserialize(bad, "model.cmk");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("model.cmk"), std::string::npos);
  }
  EXPECT_THROW(ckpt::deserialize(bytes.substr(0, bytes.size() - 3), "t"), FormatError);
  EXPECT_THROW(ckpt::deserialize(bytes + "x", "t"), FormatError);
  // Flip a byte inside the embedded code vocab text.
  auto tampered = bytes;
  const auto pos = tampered.find("CMV1");
  ASSERT_NE(pos, std::string::npos);
  tampered[pos + 10] ^= 1;
  EXPECT_THROW(ckpt::deserialize(tampered, "t"), FormatError);
}

}  // namespace
}  // namespace codematch::train
