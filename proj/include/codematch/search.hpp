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
#include <charconv>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codematch/checkpoint.hpp"
#include "codematch/pipeline.hpp"
#include "codematch/train_eval.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro
// that collides with Eigen parameter names.
#include <httplib.h>

namespace codematch::search {

using nlohmann::json;

// --- CMX1 snippet index ----------------------------------------------------------

inline constexpr std::string_view kIndexMagic = "CMX1";
inline constexpr std::uint32_t kIndexVersion = 1;

struct IndexEntry {
  int id = 0;
  std::string code;
  match::EncodedSample encoded;
  match::CachedSide<float> cached;
};

struct SnippetIndex {
  std::string model;  // model kind name
  std::string ckpt_path;
  std::uint64_t ckpt_hash = 0;
  std::uint64_t code_vocab_hash = 0;
  std::uint64_t text_vocab_hash = 0;
  std::vector<IndexEntry> entries;
};

inline SnippetIndex build_index(const ckpt::Checkpoint& c, std::uint64_t ckpt_hash, const std::string& ckpt_path,
                                std::span<const pipeline::PreparedSample> samples) {
  const auto model = train::model_from_checkpoint(c);
  const pipeline::Vocabs vocabs{c.code_vocab, c.text_vocab};
  SnippetIndex idx{std::string(match::model_name(model.kind())), ckpt_path, ckpt_hash,
                   c.code_vocab.content_hash(), c.text_vocab.content_hash(), {}};
  for (const auto& s : samples) {
    auto enc = pipeline::encode_best(vocabs, s);
    auto cached = model.cache_code(c.params, enc);
    idx.entries.push_back({s.id, s.code, std::move(enc), std::move(cached)});
  }
  return idx;
}

namespace detail {

inline void write_tensor(BinaryWriter& w, const nn::Tensor<float>& t) {
  w.u32(static_cast<std::uint32_t>(t.rows));
  w.u32(static_cast<std::uint32_t>(t.cols));
  w.f32s(std::span<const float>(t.data));
}

inline nn::Tensor<float> read_tensor(BinaryReader& r, std::size_t limit) {
  const auto rows = static_cast<int>(r.u32());
  const auto cols = static_cast<int>(r.u32());
  if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) * cols > limit) {
    throw FormatError(r.what() + ": implausible tensor shape");
  }
  nn::Tensor<float> t(rows, cols);
  for (auto& v : t.data) v = r.f32();
  return t;
}

}  // namespace detail

inline std::string serialize_index(const SnippetIndex& idx) {
  BinaryWriter w;
  w.raw(kIndexMagic);
  w.u32(kIndexVersion);
  w.str(idx.model);
  w.str(idx.ckpt_path);
  w.u64(idx.ckpt_hash);
  w.u64(idx.code_vocab_hash);
  w.u64(idx.text_vocab_hash);
  w.u32(static_cast<std::uint32_t>(idx.entries.size()));
  for (const auto& e : idx.entries) {
    w.u32(static_cast<std::uint32_t>(e.id));
    w.str(e.code);
    w.i32s(e.encoded.code.ids);
    w.i32s(e.encoded.ast.ids);
    w.i32s(e.encoded.text.ids);
    detail::write_tensor(w, e.cached.global);
    detail::write_tensor(w, e.cached.context);
  }
  return w.bytes();
}

inline SnippetIndex deserialize_index(std::string_view bytes, const std::string& what) {
  BinaryReader r(bytes, what);
  if (bytes.size() < 4 || r.raw(4) != kIndexMagic) throw FormatError(what + ": bad magic (expected CMX1)");
  if (auto v = r.u32(); v != kIndexVersion) throw FormatError(what + ": unsupported index version " + std::to_string(v));
  SnippetIndex idx;
  idx.model = r.str();
  idx.ckpt_path = r.str();
  idx.ckpt_hash = r.u64();
  idx.code_vocab_hash = r.u64();
  idx.text_vocab_hash = r.u64();
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    IndexEntry e;
    e.id = static_cast<int>(r.u32());
    e.code = r.str();
    e.encoded.id = e.id;
    e.encoded.code.ids = r.i32s();
    e.encoded.ast.ids = r.i32s();
    e.encoded.text.ids = r.i32s();
    e.cached.global = detail::read_tensor(r, bytes.size());
    e.cached.context = detail::read_tensor(r, bytes.size());
    idx.entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return idx;
}

inline void save_index(const SnippetIndex& idx, const std::string& path) { write_file(path, serialize_index(idx)); }

inline SnippetIndex load_index(const std::string& path) { return deserialize_index(read_file(path), path); }

// --- search --------------------------------------------------------------------

struct RankedResult {
  int id = 0;
  std::string code;
  float score = 0;
  int rank = 0;
};

// Checkpoint plus index, verified against each other; immutable once built.
class SearchEngine {
 public:
  SearchEngine(ckpt::Checkpoint c, std::uint64_t ckpt_hash, SnippetIndex idx)
      : ckpt_(std::make_unique<ckpt::Checkpoint>(std::move(c))), index_(std::move(idx)) {
    if (ckpt_hash != index_.ckpt_hash) {
      throw ValidationError("index was built from checkpoint " + hex64(index_.ckpt_hash) + ", got " + hex64(ckpt_hash));
    }
    if (ckpt_->code_vocab.content_hash() != index_.code_vocab_hash ||
        ckpt_->text_vocab.content_hash() != index_.text_vocab_hash) {
      throw ValidationError("vocab hash mismatch between index and checkpoint");
    }
    vocabs_ = {ckpt_->code_vocab, ckpt_->text_vocab};
    scorer_ = std::make_unique<train::Scorer>(train::model_from_checkpoint(*ckpt_), ckpt_->params);
    if (match::model_name(scorer_->model().kind()) != index_.model) {
      throw ValidationError("index model '" + index_.model + "' does not match the checkpoint");
    }
    std::vector<match::CachedSide<float>> cached;
    for (const auto& e : index_.entries) cached.push_back(e.cached);
    scorer_->set_cached(std::move(cached));
  }

  // Loads the index and its checkpoint (the recorded path unless overridden).
  static SearchEngine open(const std::string& index_path, const std::string& ckpt_override = "") {
    auto idx = load_index(index_path);
    const std::string ckpt_path = ckpt_override.empty() ? idx.ckpt_path : ckpt_override;
    const auto bytes = read_file(ckpt_path);
    return SearchEngine(ckpt::deserialize(bytes, ckpt_path), fnv1a64(bytes), std::move(idx));
  }

  std::vector<RankedResult> search(std::string_view query, int k) const {
    if (k < 1) throw ValidationError("k must be >= 1");
    const auto seq = pipeline::encode_query(vocabs_, query);
    const auto scores = scorer_->scores(seq);
    const auto order = train::order_by_score(scores);
    std::vector<RankedResult> out;
    const std::size_t n = std::min(order.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < n; ++r) {
      const auto& e = index_.entries[order[r]];
      out.push_back({e.id, e.code, scores[order[r]], static_cast<int>(r + 1)});
    }
    return out;
  }

  const SnippetIndex& index() const { return index_; }
  const std::string& model() const { return index_.model; }
  std::string ckpt_hash() const { return hex64(index_.ckpt_hash); }

 private:
  std::unique_ptr<ckpt::Checkpoint> ckpt_;
  SnippetIndex index_;
  pipeline::Vocabs vocabs_;
  std::unique_ptr<train::Scorer> scorer_;
};

inline json results_json(std::string_view query, const std::vector<RankedResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back({{"id", r.id}, {"code", r.code}, {"score", r.score}, {"rank", r.rank}});
  return {{"v", 1}, {"query", std::string(query)}, {"results", arr}};
}

// --- HTTP ----------------------------------------------------------------------

inline json error_json(std::string_view code, std::string_view message) {
  return {{"v", 1}, {"error", {{"code", std::string(code)}, {"message", std::string(message)}}}};
}

inline constexpr int kDefaultK = 10;

// Engines keyed by model id. Handlers only read the engines.
inline void install_routes(httplib::Server& srv, const std::map<std::string, const SearchEngine*>& engines) {
  if (engines.empty()) throw ValidationError("serve needs at least one index");
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
  srv.Get("/api/models", [engines, send](const httplib::Request&, httplib::Response& res) {
    json models = json::array();
    for (const auto& [id, e] : engines) models.push_back({{"id", id}, {"kind", e->model()}, {"ckpt_hash", e->ckpt_hash()}});
    send(res, 200, {{"v", 1}, {"models", models}});
  });
  srv.Get("/api/search", [engines, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q")) return send(res, 400, error_json("missing_query", "parameter 'q' is required"));
    const std::string q = req.get_param_value("q");
    int k = kDefaultK;
    if (req.has_param("k")) {
      const auto ks = req.get_param_value("k");
      const auto [p, ec] = std::from_chars(ks.data(), ks.data() + ks.size(), k);
      if (ec != std::errc{} || p != ks.data() + ks.size() || k < 1) {
        return send(res, 400, error_json("bad_k", "parameter 'k' must be an integer >= 1"));
      }
    }
    const SearchEngine* engine = engines.begin()->second;
    if (req.has_param("model")) {
      auto it = engines.find(req.get_param_value("model"));
      if (it == engines.end()) return send(res, 404, error_json("unknown_model", "no model with that id"));
      engine = it->second;
    } else if (engines.size() > 1) {
      return send(res, 400, error_json("missing_model", "parameter 'model' is required when several models are served"));
    }
    try {
      send(res, 200, results_json(q, engine->search(q, k)));
    } catch (const ValidationError& e) {
      send(res, 400, error_json("empty_query", e.what()));
    }
  });
}

}  // namespace codematch::search
