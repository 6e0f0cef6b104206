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

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codematch/ast.hpp"
#include "codematch/corpus.hpp"
#include "codematch/matchers.hpp"
#include "codematch/python_parser.hpp"
#include "codematch/tokenizer.hpp"

// Glue from raw samples to model inputs: SBT strings, subword encoding of
// the three channels, and parser backend selection.
namespace codematch::pipeline {

struct Vocabs {
  tok::SubwordVocab code;  // shared by the code and AST channels
  tok::SubwordVocab text;
};

struct PreparedSample {
  int id = 0;
  std::string code;
  std::string description;
  std::string sbt;  // space-joined SBT tokens
  bool ast_fallback = false;
};

enum class Channel : std::uint64_t { kCode = 0, kAst = 1, kText = 2 };

inline std::unique_ptr<ast::ParserBackend> make_backend(std::string_view name, const std::string& trees_path = "") {
  if (name == "embedded") return std::make_unique<ast::python::EmbeddedBackend>();
  if (name == "file") {
    if (trees_path.empty()) throw ValidationError("backend 'file' needs a pre-parsed tree file");
    return std::make_unique<ast::PreparsedBackend>(ast::PreparsedBackend::from_json(read_file(trees_path), trees_path));
  }
  throw ValidationError("unknown parser backend '" + std::string(name) + "' (expected embedded | file)");
}

inline std::vector<PreparedSample> prepare(std::span<const corpus::Sample> samples, const ast::ParserBackend& backend) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto parsed = ast::parse_snippet(s.id, s.code, backend);
    out.push_back({s.id, s.code, s.description, ast::sbt_join(ast::sbt_serialize(parsed.tree)), parsed.fallback});
  }
  return out;
}

// Texts each vocabulary is trained on.
inline std::vector<std::string> vocab_texts(std::span<const PreparedSample> samples, std::string_view channel) {
  std::vector<std::string> out;
  for (const auto& s : samples) {
    if (channel == "code") {
      out.push_back(s.code);
      out.push_back(s.sbt);
    } else if (channel == "text") {
      out.push_back(s.description);
    } else {
      throw ValidationError("unknown vocab channel '" + std::string(channel) + "' (expected code | text)");
    }
  }
  return out;
}

inline match::EncodedSample encode_best(const Vocabs& v, const PreparedSample& s) {
  return match::make_encoded(s.id, tok::encode_best(v.code, s.code), tok::encode_best(v.code, s.sbt),
                             tok::encode_best(v.text, s.description));
}

// Sampled encoding; each (epoch, sample, channel) draws from its own stream.
inline match::EncodedSample encode_sampled(const Vocabs& v, const PreparedSample& s, double alpha, std::uint64_t seed,
                                           int epoch) {
  auto stream = [&](Channel c) {
    return mix_seed(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(s.id)),
                    static_cast<std::uint64_t>(c));
  };
  return match::make_encoded(s.id, tok::encode_sample(v.code, s.code, alpha, stream(Channel::kCode)),
                             tok::encode_sample(v.code, s.sbt, alpha, stream(Channel::kAst)),
                             tok::encode_sample(v.text, s.description, alpha, stream(Channel::kText)));
}

// Query text for search; rejects queries with no tokens.
inline tok::TokenSeq encode_query(const Vocabs& v, std::string_view query) {
  auto seq = tok::encode_best(v.text, query);
  if (seq.ids.empty()) throw ValidationError("empty query");
  return match::fit_length(std::move(seq), match::kMaxTextTokens);
}

// --- SBT file (output of `codematch sbt`) ------------------------------------

inline nlohmann::json sbt_to_json(std::span<const PreparedSample> samples) {
  auto arr = nlohmann::json::array();
  for (const auto& s : samples) arr.push_back({{"id", s.id}, {"fallback", s.ast_fallback}, {"sbt", s.sbt}});
  return arr;
}

}  // namespace codematch::pipeline
