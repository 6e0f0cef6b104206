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


// Trains a small CAT model on a CoNaLa-format corpus, reports test metrics
// and answers a few queries from an in-memory index.
//
//   quickstart [--train train.json] [--test test.json] [--epochs N] [-q query]...

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "codematch/checkpoint.hpp"
#include "codematch/corpus.hpp"
#include "codematch/pipeline.hpp"
#include "codematch/search.hpp"
#include "codematch/train_eval.hpp"

namespace cm = codematch;

int main(int argc, char** argv) {
  CLI::App app{"codematch quickstart"};
  std::string train_path = std::string(CODEMATCH_SAMPLE_DATA) + "/fixture_train.json";
  std::string test_path = std::string(CODEMATCH_SAMPLE_DATA) + "/fixture_test.json";
  int epochs = 30;
  std::vector<std::string> queries;
  app.add_option("--train", train_path)->capture_default_str();
  app.add_option("--test", test_path)->capture_default_str();
  app.add_option("--epochs", epochs)->capture_default_str();
  app.add_option("-q,--query", queries, "Queries (default: the first three test descriptions)");
  CLI11_PARSE(app, argc, argv);

  try {
    auto backend = cm::pipeline::make_backend("embedded");
    const auto train = cm::pipeline::prepare(cm::corpus::load_corpus(train_path, cm::corpus::Split::kTrain), *backend);
    const auto test = cm::pipeline::prepare(cm::corpus::load_corpus(test_path, cm::corpus::Split::kTest), *backend);
    const cm::pipeline::Vocabs vocabs{cm::tok::train_unigram(cm::pipeline::vocab_texts(train, "code"), 400, 1),
                                      cm::tok::train_unigram(cm::pipeline::vocab_texts(train, "text"), 300, 1)};

    cm::train::TrainConfig cfg;
    cfg.model = cm::match::ModelKind::kCat;
    cfg.dims = {32, 32, 32, 4};
    cfg.epochs = epochs;
    cfg.margin = 0.3;
    cfg.resample_negatives = true;
    auto result = cm::train::train(cfg, vocabs, train, [](const cm::train::EpochStats& s) {
      if (s.epoch % 10 == 0) std::cout << "epoch " << s.epoch << " loss " << s.mean_loss << "\n";
    });

    const cm::match::Model<float> model(cfg.model, cfg.dims);
    const auto m = cm::train::evaluate(model, result.params, vocabs, test);
    std::cout << "test MRR " << m.mrr << "  R@1 " << m.recall_at.at(1) << "  R@5 " << m.recall_at.at(5) << "  R@10 "
              << m.recall_at.at(10) << "\n";

    auto ckpt = cm::train::make_checkpoint(cfg, vocabs, std::move(result.params));
    const auto bytes = cm::ckpt::serialize(ckpt);
    auto index = cm::search::build_index(ckpt, cm::fnv1a64(bytes), "", test);
    const cm::search::SearchEngine engine(std::move(ckpt), cm::fnv1a64(bytes), std::move(index));
    if (queries.empty()) {
      for (std::size_t i = 0; i < 3 && i < test.size(); ++i) queries.push_back(test[i].description);
    }
    for (const auto& q : queries) {
      std::cout << "\n> " << q << "\n";
      for (const auto& r : engine.search(q, 3)) std::cout << "  " << r.rank << ". [" << r.score << "] " << r.code << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
