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

// Small trained artifacts over the hand-written fixture corpus.

#include <string>
#include <vector>

#include "codematch/corpus.hpp"
#include "codematch/pipeline.hpp"
#include "codematch/train_eval.hpp"

#ifndef CODEMATCH_TEST_DATA
#error "CODEMATCH_TEST_DATA must point at tests/data"
#endif

namespace codematch::fixture {

inline std::string data_path(const std::string& name) { return std::string(CODEMATCH_TEST_DATA) + "/" + name; }

inline std::vector<pipeline::PreparedSample> prepared(corpus::Split split) {
  const auto samples = corpus::load_corpus(data_path(split == corpus::Split::kTrain ? "fixture_train.json" : "fixture_test.json"), split);
  return pipeline::prepare(samples, *pipeline::make_backend("embedded"));
}

inline pipeline::Vocabs vocabs(const std::vector<pipeline::PreparedSample>& train, int code_size = 400, int text_size = 300) {
  return {tok::train_unigram(pipeline::vocab_texts(train, "code"), code_size, 1),
          tok::train_unigram(pipeline::vocab_texts(train, "text"), text_size, 1)};
}

// Quick config: tiny dims, few epochs.
inline train::TrainConfig tiny_config(match::ModelKind kind, int epochs = 2) {
  train::TrainConfig c;
  c.model = kind;
  c.dims = {8, 6, 5, 3};
  c.epochs = epochs;
  c.batch_size = 16;
  c.pretrain.epochs = 1;
  return c;
}

}  // namespace codematch::fixture
