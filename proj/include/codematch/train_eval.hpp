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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "codematch/checkpoint.hpp"
#include "codematch/corpus.hpp"
#include "codematch/matchers.hpp"
#include "codematch/nn/adam.hpp"
#include "codematch/nn/skipgram.hpp"
#include "codematch/pipeline.hpp"

namespace codematch::train {

using nlohmann::json;

struct Seeds {
  std::uint64_t init = 1;
  std::uint64_t triplets = 2;
  std::uint64_t shuffle = 3;
  std::uint64_t sampling = 4;
  std::uint64_t pretrain = 5;
};

struct DataPaths {
  std::string corpus;
  std::string code_vocab;
  std::string text_vocab;
  std::string ast_backend = "embedded";
  std::string trees_train;
  std::string trees_test;
};

struct TrainConfig {
  match::ModelKind model = match::ModelKind::kMpCat;
  match::Dims dims;
  int epochs = 100;
  int batch_size = 32;
  double margin = 0.05;
  double lr = 1e-3;
  int negatives = 5;
  double alpha = 0.2;
  bool subword_sampling = true;
  bool resample_negatives = false;
  bool pretrain_embeddings = true;
  nn::SkipGramOptions pretrain;
  Seeds seeds;
  DataPaths data;
  // Directory relative data paths resolve against; not echoed.
  std::string base_dir;

  std::string resolve(const std::string& p) const {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).string();
  }

  void validate() const {
    if (!(margin > 0)) throw ValidationError("config: margin must be > 0");
    if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (negatives < 1) throw ValidationError("config: negatives must be >= 1");
    if (!(lr >= 0)) throw ValidationError("config: lr must be >= 0");
    if (subword_sampling && !(alpha > 0)) throw ValidationError("config: alpha must be > 0");
    if (dims.embed < 1 || dims.hidden < 1 || dims.aggregate < 1 || dims.perspectives < 1) {
      throw ValidationError("config: dims must be >= 1");
    }
  }
};

inline json to_json(const TrainConfig& c) {
  return {
      {"model", std::string(match::model_name(c.model))},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"margin", c.margin},
      {"lr", c.lr},
      {"negatives", c.negatives},
      {"alpha", c.alpha},
      {"subword_sampling", c.subword_sampling},
      {"resample_negatives", c.resample_negatives},
      {"pretrain_embeddings", c.pretrain_embeddings},
      {"dims",
       {{"embed", c.dims.embed},
        {"hidden", c.dims.hidden},
        {"aggregate", c.dims.aggregate},
        {"perspectives", c.dims.perspectives}}},
      {"pretrain",
       {{"window", c.pretrain.window},
        {"negatives", c.pretrain.negatives},
        {"epochs", c.pretrain.epochs},
        {"lr", c.pretrain.lr}}},
      {"seeds",
       {{"init", c.seeds.init},
        {"triplets", c.seeds.triplets},
        {"shuffle", c.seeds.shuffle},
        {"sampling", c.seeds.sampling},
        {"pretrain", c.seeds.pretrain}}},
      {"data",
       {{"corpus", c.data.corpus},
        {"code_vocab", c.data.code_vocab},
        {"text_vocab", c.data.text_vocab},
        {"ast_backend", c.data.ast_backend},
        {"trees_train", c.data.trees_train},
        {"trees_test", c.data.trees_test}}},
  };
}

namespace detail {

// Reads known keys from `obj` into setters; any other key is an error.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj.is_object()) throw ValidationError(where_ + ": expected a table");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.push_back(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<V, bool>) {
        if (!it->is_boolean()) throw ValidationError("");
      } else if constexpr (std::is_integral_v<V>) {
        if (!it->is_number_integer()) throw ValidationError("");
      } else if constexpr (std::is_floating_point_v<V>) {
        if (!it->is_number()) throw ValidationError("");
      } else {
        if (!it->is_string()) throw ValidationError("");
      }
      out = it->get<V>();
    } catch (const std::exception&) {
      throw ValidationError(where_ + "." + key + ": wrong type");
    }
  }

  const json& sub(const char* key) {
    seen_.push_back(key);
    static const json kEmpty = json::object();
    auto it = obj_.find(key);
    return it == obj_.end() ? kEmpty : *it;
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        throw ValidationError(where_ + ": unknown key '" + k + "'");
      }
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string> seen_;
};

inline json toml_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (auto v = n.as_string()) return v->get();
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  throw ValidationError("config: unsupported TOML value type");
}

}  // namespace detail

inline TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  detail::Fields f(j, "config");
  std::string model(match::model_name(c.model));
  f.get("model", model);
  c.model = match::parse_model_kind(model);
  f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("margin", c.margin);
  f.get("lr", c.lr);
  f.get("negatives", c.negatives);
  f.get("alpha", c.alpha);
  f.get("subword_sampling", c.subword_sampling);
  f.get("resample_negatives", c.resample_negatives);
  f.get("pretrain_embeddings", c.pretrain_embeddings);
  {
    detail::Fields d(f.sub("dims"), "config.dims");
    d.get("embed", c.dims.embed);
    d.get("hidden", c.dims.hidden);
    d.get("aggregate", c.dims.aggregate);
    d.get("perspectives", c.dims.perspectives);
    d.finish();
  }
  {
    detail::Fields p(f.sub("pretrain"), "config.pretrain");
    p.get("window", c.pretrain.window);
    p.get("negatives", c.pretrain.negatives);
    p.get("epochs", c.pretrain.epochs);
    p.get("lr", c.pretrain.lr);
    p.finish();
  }
  {
    detail::Fields s(f.sub("seeds"), "config.seeds");
    s.get("init", c.seeds.init);
    s.get("triplets", c.seeds.triplets);
    s.get("shuffle", c.seeds.shuffle);
    s.get("sampling", c.seeds.sampling);
    s.get("pretrain", c.seeds.pretrain);
    s.finish();
  }
  {
    detail::Fields d(f.sub("data"), "config.data");
    d.get("corpus", c.data.corpus);
    d.get("code_vocab", c.data.code_vocab);
    d.get("text_vocab", c.data.text_vocab);
    d.get("ast_backend", c.data.ast_backend);
    d.get("trees_train", c.data.trees_train);
    d.get("trees_test", c.data.trees_test);
    d.finish();
  }
  f.finish();
  c.validate();
  return c;
}

inline TrainConfig config_from_toml(std::string_view text, const std::string& what = "config") {
  try {
    return config_from_json(detail::toml_to_json(toml::parse(text, what)));
  } catch (const toml::parse_error& e) {
    throw ParseError(what + ": " + std::string(e.description()) + " at line " +
                     std::to_string(e.source().begin.line));
  }
}

inline TrainConfig load_config(const std::string& path) {
  auto c = config_from_toml(read_file(path), path);
  c.base_dir = std::filesystem::path(path).parent_path().string();
  return c;
}

// --- ranking -----------------------------------------------------------------

// 1 + #{strictly higher} + #{equal with a smaller candidate index}.
template <typename S>
int rank_of_gold(std::span<const S> scores, std::size_t gold) {
  if (gold >= scores.size()) throw ValidationError("gold candidate " + std::to_string(gold) + " not among candidates");
  const S g = scores[gold];
  int rank = 1;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] > g || (c < gold && scores[c] == g)) ++rank;
  }
  return rank;
}

inline constexpr int kRecallCutoffs[] = {1, 5, 10};

struct RankingMetrics {
  double mrr = 0;
  std::map<int, double> recall_at;
  std::vector<int> ranks;
};

inline RankingMetrics metrics_from_ranks(std::vector<int> ranks) {
  if (ranks.empty()) throw ValidationError("evaluation needs at least one query");
  RankingMetrics m;
  double rr = 0;
  for (int r : ranks) {
    if (r < 1) throw ValidationError("ranks start at 1");
    rr += 1.0 / r;
  }
  m.mrr = rr / static_cast<double>(ranks.size());
  for (int k : kRecallCutoffs) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](int r) { return r <= k; });
    m.recall_at[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  m.ranks = std::move(ranks);
  return m;
}

// --- shared scoring path -------------------------------------------------------

// Frozen model plus cached code sides of a candidate pool. Evaluation and
// search both score through here, so their orderings agree bit for bit.
class Scorer {
 public:
  Scorer(match::Model<float> model, const nn::ParamStore<float>& params)
      : model_(std::move(model)), params_(&params) {}

  void add_candidates(std::span<const match::EncodedSample> samples) {
    for (const auto& s : samples) cached_.push_back(model_.cache_code(*params_, s));
  }

  void set_cached(std::vector<match::CachedSide<float>> c) { cached_ = std::move(c); }
  const std::vector<match::CachedSide<float>>& cached() const { return cached_; }
  const match::Model<float>& model() const { return model_; }
  std::size_t size() const { return cached_.size(); }

  std::vector<float> scores(const tok::TokenSeq& text) const {
    const auto t = model_.cache_text(*params_, text);
    std::vector<float> out;
    out.reserve(cached_.size());
    for (const auto& c : cached_) out.push_back(model_.score_cached(*params_, c, t));
    return out;
  }

 private:
  match::Model<float> model_;
  const nn::ParamStore<float>* params_;
  std::vector<match::CachedSide<float>> cached_;
};

// Candidate indices ordered by descending score, ties by ascending index.
inline std::vector<std::size_t> order_by_score(std::span<const float> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

// Query i is description i; its gold candidate is code i.
inline RankingMetrics evaluate(const match::Model<float>& model, const nn::ParamStore<float>& params,
                               const pipeline::Vocabs& vocabs, std::span<const pipeline::PreparedSample> test) {
  if (test.empty()) throw ValidationError("evaluation needs a non-empty test set");
  std::vector<match::EncodedSample> enc;
  for (const auto& s : test) enc.push_back(pipeline::encode_best(vocabs, s));
  Scorer scorer(model, params);
  scorer.add_candidates(enc);
  std::vector<int> ranks;
  for (std::size_t q = 0; q < enc.size(); ++q) {
    const auto s = scorer.scores(enc[q].text);
    ranks.push_back(rank_of_gold(std::span<const float>(s), q));
  }
  return metrics_from_ranks(std::move(ranks));
}

inline json report_json(std::string_view model, const RankingMetrics& m, const json& config_echo,
                        std::optional<double> runtime_seconds) {
  json recall = json::object();
  for (const auto& [k, v] : m.recall_at) recall[std::to_string(k)] = v;
  return {{"model", std::string(model)},
          {"mrr", m.mrr},
          {"recall", recall},
          {"ranks", m.ranks},
          {"config_echo", config_echo},
          {"runtime_seconds", runtime_seconds ? json(*runtime_seconds) : json(nullptr)}};
}

// --- training ----------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double active_fraction = 0;  // triplets with a positive hinge
};

struct TrainResult {
  nn::ParamStore<float> params;
  std::vector<EpochStats> epochs;
};

// Initializes parameters, optionally with skip-gram tables over the
// best-encoded training channels.
inline nn::ParamStore<float> initial_params(const TrainConfig& cfg, const pipeline::Vocabs& vocabs,
                                            std::span<const pipeline::PreparedSample> train) {
  const match::Model<float> model(cfg.model, cfg.dims);
  nn::ParamStore<float> params;
  model.init_params(params, vocabs.code.size(), vocabs.text.size(), cfg.seeds.init);
  if (!cfg.pretrain_embeddings) return params;
  std::map<std::string, std::vector<std::vector<int>>> seqs;
  for (const auto& s : train) {
    const auto e = pipeline::encode_best(vocabs, s);
    seqs["code"].push_back(e.code.ids);
    seqs["ast"].push_back(e.ast.ids);
    seqs["text"].push_back(e.text.ids);
  }
  for (const auto& [name, channel] : model.embedding_tables()) {
    nn::skipgram_pretrain(params.at(name), seqs[channel], cfg.pretrain, mix_seed(cfg.seeds.pretrain, fnv1a64(name)),
                          tok::kPadId);
  }
  return params;
}

using EpochCallback = std::function<void(const EpochStats&)>;

inline TrainResult train(const TrainConfig& cfg, const pipeline::Vocabs& vocabs,
                         std::span<const pipeline::PreparedSample> train_set, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<corpus::Sample> samples;
  for (const auto& s : train_set) samples.push_back({s.id, s.code, s.description});
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].id != static_cast<int>(i)) throw ValidationError("training ids must be contiguous from 0");
  }
  const match::Model<float> model(cfg.model, cfg.dims);
  TrainResult out{initial_params(cfg, vocabs, train_set), {}};
  nn::ParamStore<float>& params = out.params;
  nn::ParamStore<float> grads = params.zeros_like();
  auto adam = nn::make_adam(params, nn::AdamConfig{cfg.lr});

  auto triplets = corpus::make_triplets(samples, cfg.negatives, cfg.seeds.triplets);
  std::vector<match::EncodedSample> enc;
  if (!cfg.subword_sampling) {
    for (const auto& s : train_set) enc.push_back(pipeline::encode_best(vocabs, s));
  }
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.resample_negatives && epoch > 0) {
      triplets = corpus::make_triplets(samples, cfg.negatives, mix_seed(cfg.seeds.triplets, epoch));
    }
    if (cfg.subword_sampling) {
      enc.clear();
      for (const auto& s : train_set) enc.push_back(pipeline::encode_sampled(vocabs, s, cfg.alpha, cfg.seeds.sampling, epoch));
    }
    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(mix_seed(cfg.seeds.shuffle, static_cast<std::uint64_t>(epoch))).shuffle(order.begin(), order.end());

    double epoch_loss = 0;
    std::size_t active = 0;
    for (std::size_t b0 = 0, batch = 0; b0 < order.size(); b0 += cfg.batch_size, ++batch) {
      grads.set_zero();
      double batch_loss = 0;
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& t = triplets[order[i]];
        nn::Graph<float> g(params, &grads, nn::NormGuard::kEpsilon);
        g.set_check_finite(false);
        const nn::Var loss = model.triplet_loss(g, enc[t.code_id], enc[t.pos_id].text, enc[t.neg_id].text,
                                                static_cast<float>(cfg.margin));
        const double l = g.value(loss).item();
        batch_loss += l;
        if (l > 0) ++active;
        g.backward(loss);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch + 1));
      }
      nn::adam_step(params, grads, adam);
      epoch_loss += batch_loss;
    }
    EpochStats st{epoch + 1, epoch_loss / static_cast<double>(triplets.size()),
                  static_cast<double>(active) / static_cast<double>(triplets.size())};
    out.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return out;
}

inline ckpt::Checkpoint make_checkpoint(const TrainConfig& cfg, const pipeline::Vocabs& vocabs, nn::ParamStore<float> params) {
  return {to_json(cfg), vocabs.code, vocabs.text, std::move(params)};
}

inline match::Model<float> model_from_checkpoint(const ckpt::Checkpoint& c) {
  const auto cfg = config_from_json(c.config);
  return match::Model<float>(cfg.model, cfg.dims);
}

}  // namespace codematch::train
