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

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codematch/nn/graph.hpp"
#include "codematch/nn/param_store.hpp"
#include "codematch/tokenizer.hpp"
#include "codematch/util/binary_io.hpp"
#include "codematch/util/error.hpp"
#include "codematch/util/rng.hpp"

// The four code/description matchers. Each model maps an encoded sample to
// a code vector and a description vector and scores them with l2sim.
namespace codematch::match {

using nn::Graph;
using nn::LstmWeights;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;

enum class ModelKind { kCt, kCat, kMp, kMpCat };

inline std::string_view model_name(ModelKind k) {
  switch (k) {
    case ModelKind::kCt:
      return "ct";
    case ModelKind::kCat:
      return "cat";
    case ModelKind::kMp:
      return "mp";
    case ModelKind::kMpCat:
      return "mp-cat";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::kCt, ModelKind::kCat, ModelKind::kMp, ModelKind::kMpCat}) {
    if (model_name(k) == s) return k;
  }
  throw ValidationError("unknown model '" + std::string(s) + "' (expected ct | cat | mp | mp-cat)");
}

inline bool uses_ast(ModelKind k) { return k != ModelKind::kCt; }
inline bool uses_cat_branch(ModelKind k) { return k == ModelKind::kCat || k == ModelKind::kMpCat; }
inline bool uses_mp_branch(ModelKind k) { return k == ModelKind::kMp || k == ModelKind::kMpCat; }

struct Dims {
  int embed = 128;        // E
  int hidden = 128;       // H, per direction
  int aggregate = 128;    // G, aggregation LSTM hidden per direction
  int perspectives = 10;  // l
};

inline constexpr std::size_t kMaxCodeTokens = 200;
inline constexpr std::size_t kMaxAstTokens = 400;
inline constexpr std::size_t kMaxTextTokens = 60;

// Truncates to `cap` ids and pads an empty sequence with one pad id.
inline tok::TokenSeq fit_length(tok::TokenSeq s, std::size_t cap) {
  if (s.ids.size() > cap) s.ids.resize(cap);
  if (s.ids.empty()) s.ids.push_back(tok::kPadId);
  return s;
}

struct EncodedSample {
  int id = 0;
  tok::TokenSeq code;
  tok::TokenSeq ast;  // subword-encoded SBT string
  tok::TokenSeq text;
};

inline EncodedSample make_encoded(int id, tok::TokenSeq code, tok::TokenSeq ast, tok::TokenSeq text) {
  return {id, fit_length(std::move(code), kMaxCodeTokens), fit_length(std::move(ast), kMaxAstTokens),
          fit_length(std::move(text), kMaxTextTokens)};
}

// Strategy order inside every 4l-wide matching block.
inline constexpr std::array<std::string_view, 4> kStrategies = {"full", "maxpool", "attentive", "max_attentive"};

template <typename T>
struct MatchWeights {
  std::array<Var, 4> w;  // each [l x D], in kStrategies order
};

// Bilateral multi-perspective matching of P [Lp x D] against Q [Lq x D].
// Returns (P' [Lp x 4l], Q' [Lq x 4l]). Summaries per strategy: full = last
// row of the other sequence; maxpool = its per-dimension maximum;
// attentive = cosine-weighted mean; max_attentive = its row of highest
// cosine (first on ties).
template <typename T>
std::pair<Var, Var> bimpm_match(Graph<T>& g, Var p, Var q, const MatchWeights<T>& p2q, const MatchWeights<T>& q2p) {
  const int lp = g.value(p).rows;
  const int lq = g.value(q).rows;
  if (lp < 1 || lq < 1) throw ShapeError("bimpm_match over an empty sequence");
  if (g.value(p).cols != g.value(q).cols) throw ShapeError("bimpm_match width mismatch");
  auto one_side = [&g](Var a, Var other, int la, int lo, const MatchWeights<T>& w) {
    const Var full = g.repeat_row(g.slice_rows(other, lo - 1, 1), la);
    const Var pooled = g.repeat_row(g.maxpool_rows(other), la);
    const Var cos = g.cosine_matrix(a, other);
    const Var attentive = g.attentive_mean(cos, other);
    const Var max_att = g.gather_rows(other, g.argmax_rows(cos));
    return g.concat_cols({g.mp_cosine(a, full, w.w[0]), g.mp_cosine(a, pooled, w.w[1]),
                          g.mp_cosine(a, attentive, w.w[2]), g.mp_cosine(a, max_att, w.w[3])});
  };
  const Var p_out = one_side(p, q, lp, lq, p2q);
  const Var q_out = one_side(q, p, lq, lp, q2p);
  return {p_out, q_out};
}

// Code-side representation: `global` feeds the CAT/CT vector, `context` the
// MP matching. Either may be absent (id -1) depending on the model.
struct CodeSide {
  Var global;
  Var context;
};

struct TextSide {
  Var global;
  Var context;
};

struct OutputVars {
  Var code_vec;
  Var text_vec;
  Var score;
};

template <typename T>
struct ModelOutput {
  Tensor<T> code_vec;
  Tensor<T> text_vec;
  T score = 0;
};

// Query-independent tensors of one side, reusable across many pairings.
template <typename T>
struct CachedSide {
  Tensor<T> global;
  Tensor<T> context;

  bool operator==(const CachedSide&) const = default;
};

template <typename T>
class Model {
 public:
  Model(ModelKind kind, Dims dims) : kind_(kind), dims_(dims) {
    if (dims.embed < 1 || dims.hidden < 1 || dims.aggregate < 1 || dims.perspectives < 1) {
      throw ValidationError("model dimensions must be >= 1");
    }
  }

  ModelKind kind() const { return kind_; }
  const Dims& dims() const { return dims_; }

  // Width of code_vec and text_vec.
  int output_width() const {
    int w = 0;
    if (kind_ == ModelKind::kCt) w += 2 * dims_.hidden;
    if (uses_cat_branch(kind_)) w += 4 * dims_.hidden;
    if (uses_mp_branch(kind_)) w += 2 * dims_.aggregate;
    return w;
  }

  // Embedding table names with the vocabulary ("code" or "text") each reads.
  std::vector<std::pair<std::string, std::string>> embedding_tables() const {
    std::vector<std::pair<std::string, std::string>> out;
    if (kind_ == ModelKind::kCt) out = {{"ct.code.embed", "code"}, {"ct.text.embed", "text"}};
    if (uses_cat_branch(kind_)) {
      out.insert(out.end(), {{"cat.ast.embed", "ast"}, {"cat.code.embed", "code"}, {"cat.text.embed", "text"}});
    }
    if (uses_mp_branch(kind_)) {
      out.insert(out.end(), {{"mp.ast.embed", "ast"}, {"mp.code.embed", "code"}, {"mp.text.embed", "text"}});
    }
    return out;
  }

  // Registers and initializes every parameter. Each tensor draws from its
  // own stream seeded by its name, so adding parameters never shifts others.
  void init_params(ParamStore<T>& store, int code_vocab, int text_vocab, std::uint64_t seed) const {
    const int e = dims_.embed, h = dims_.hidden, g = dims_.aggregate, l = dims_.perspectives;
    auto add = [&](const std::string& name, int rows, int cols, double lo, double hi) {
      Rng rng(mix_seed(seed, fnv1a64(name)));
      nn::fill_uniform(store.add(name, rows, cols), rng, lo, hi);
    };
    auto add_lstm = [&](const std::string& prefix, int in, int hid) {
      const double s = 1.0 / std::sqrt(static_cast<double>(hid));
      for (const char* dir : {".fwd", ".bwd"}) {
        add(prefix + dir + ".w_ih", 4 * hid, in, -s, s);
        add(prefix + dir + ".w_hh", 4 * hid, hid, -s, s);
        add(prefix + dir + ".b", 1, 4 * hid, -s, s);
      }
    };
    for (const auto& [name, vocab] : embedding_tables()) {
      add(name, vocab == "text" ? text_vocab : code_vocab, e, -0.1, 0.1);
    }
    if (kind_ == ModelKind::kCt) {
      add_lstm("ct.code.lstm", e, h);
      add_lstm("ct.text.lstm", e, h);
    }
    if (uses_cat_branch(kind_)) {
      add_lstm("cat.code.lstm", e, h);
      add_lstm("cat.ast.lstm", e, h);
      add_lstm("cat.text.lstm", e, 2 * h);
    }
    if (uses_mp_branch(kind_)) {
      add_lstm("mp.code.lstm", e, h);
      add_lstm("mp.ast.lstm", e, h);
      add_lstm("mp.text.lstm", e, h);
      for (const char* dir : {"p2q", "q2p"}) {
        for (auto s : kStrategies) add("mp." + std::string(dir) + "." + std::string(s), l, 2 * h, 0.1, 1.0);
      }
      add_lstm("mp.agg.code", 4 * l, g);
      add_lstm("mp.agg.text", 4 * l, g);
    }
  }

  CodeSide encode_code(Graph<T>& g, const EncodedSample& s) const {
    CodeSide out{Var{}, Var{}};
    if (kind_ == ModelKind::kCt) out.global = pooled(g, "ct.code", s.code);
    if (uses_cat_branch(kind_)) {
      out.global = g.concat_cols({pooled(g, "cat.code", s.code), pooled(g, "cat.ast", s.ast)});
    }
    if (uses_mp_branch(kind_)) {
      // Temporal concatenation: code positions followed by AST positions.
      out.context = g.concat_rows({contextual(g, "mp.code", s.code).seq, contextual(g, "mp.ast", s.ast).seq});
    }
    return out;
  }

  TextSide encode_text(Graph<T>& g, const tok::TokenSeq& text) const {
    TextSide out{Var{}, Var{}};
    if (kind_ == ModelKind::kCt) out.global = pooled(g, "ct.text", text);
    if (uses_cat_branch(kind_)) out.global = pooled(g, "cat.text", text);
    if (uses_mp_branch(kind_)) out.context = contextual(g, "mp.text", text).seq;
    return out;
  }

  OutputVars combine(Graph<T>& g, const CodeSide& code, const TextSide& text) const {
    std::vector<Var> cv, tv;
    if (kind_ == ModelKind::kCt || uses_cat_branch(kind_)) {
      cv.push_back(code.global);
      tv.push_back(text.global);
    }
    if (uses_mp_branch(kind_)) {
      const auto [pm, qm] = bimpm_match(g, code.context, text.context, weights(g, "mp.p2q"), weights(g, "mp.q2p"));
      cv.push_back(aggregate(g, "mp.agg.code", pm));
      tv.push_back(aggregate(g, "mp.agg.text", qm));
    }
    const Var c = cv.size() == 1 ? cv[0] : g.concat_cols(cv);
    const Var t = tv.size() == 1 ? tv[0] : g.concat_cols(tv);
    return {c, t, g.l2sim(c, t)};
  }

  OutputVars forward(Graph<T>& g, const EncodedSample& s) const {
    return combine(g, encode_code(g, s), encode_text(g, s.text));
  }

  // max(0, margin - cos(C, D+) + cos(C, D-)) over the final vectors. The
  // code side is encoded once and paired with both descriptions.
  Var triplet_loss(Graph<T>& g, const EncodedSample& code, const tok::TokenSeq& pos, const tok::TokenSeq& neg,
                   T margin) const {
    const CodeSide c = encode_code(g, code);
    const OutputVars p = combine(g, c, encode_text(g, pos));
    const OutputVars n = combine(g, c, encode_text(g, neg));
    return g.triplet_hinge(g.cosine(p.code_vec, p.text_vec), g.cosine(n.code_vec, n.text_vec), margin);
  }

  CachedSide<T> cache_code(const ParamStore<T>& params, const EncodedSample& s, nn::NormGuard guard = nn::NormGuard::kStrict) const {
    Graph<T> g(params, nullptr, guard);
    return extract(g, encode_code(g, s));
  }

  CachedSide<T> cache_text(const ParamStore<T>& params, const tok::TokenSeq& text, nn::NormGuard guard = nn::NormGuard::kStrict) const {
    Graph<T> g(params, nullptr, guard);
    return extract(g, encode_text(g, text));
  }

  // Pairs cached sides; bit-identical to score() on the same sample.
  T score_cached(const ParamStore<T>& params, const CachedSide<T>& code, const CachedSide<T>& text,
                 nn::NormGuard guard = nn::NormGuard::kStrict) const {
    Graph<T> g(params, nullptr, guard);
    auto load = [&g](const CachedSide<T>& c) {
      return std::pair<Var, Var>{c.global.empty() ? Var{} : g.constant(c.global),
                                 c.context.empty() ? Var{} : g.constant(c.context)};
    };
    const auto [cg, cc] = load(code);
    const auto [tg, tc] = load(text);
    return g.value(combine(g, CodeSide{cg, cc}, TextSide{tg, tc}).score).item();
  }

  // Scores `s` with a throwaway evaluation graph.
  ModelOutput<T> score(const ParamStore<T>& params, const EncodedSample& s, nn::NormGuard guard = nn::NormGuard::kStrict) const {
    Graph<T> g(params, nullptr, guard);
    const auto o = forward(g, s);
    return {g.value(o.code_vec), g.value(o.text_vec), g.value(o.score).item()};
  }

 private:
  LstmWeights lstm_weights(Graph<T>& g, const std::string& prefix) const {
    return {g.param(prefix + ".w_ih"), g.param(prefix + ".w_hh"), g.param(prefix + ".b")};
  }

  typename Graph<T>::BiLstmOut contextual(Graph<T>& g, const std::string& branch, const tok::TokenSeq& seq) const {
    const Var emb = g.embed(g.param(branch + ".embed"), seq.ids);
    return g.bilstm(emb, lstm_weights(g, branch + ".lstm.fwd"), lstm_weights(g, branch + ".lstm.bwd"));
  }

  Var pooled(Graph<T>& g, const std::string& branch, const tok::TokenSeq& seq) const {
    return g.maxpool_rows(contextual(g, branch, seq).seq);
  }

  MatchWeights<T> weights(Graph<T>& g, const std::string& prefix) const {
    MatchWeights<T> w;
    for (std::size_t i = 0; i < kStrategies.size(); ++i) w.w[i] = g.param(prefix + "." + std::string(kStrategies[i]));
    return w;
  }

  Var aggregate(Graph<T>& g, const std::string& prefix, Var matched) const {
    const auto out = g.bilstm(matched, lstm_weights(g, prefix + ".fwd"), lstm_weights(g, prefix + ".bwd"));
    return g.concat_cols({out.fwd_final, out.bwd_final});
  }

  template <typename Side>
  static CachedSide<T> extract(const Graph<T>& g, const Side& side) {
    CachedSide<T> c;
    if (side.global.id >= 0) c.global = g.value(side.global);
    if (side.context.id >= 0) c.context = g.value(side.context);
    return c;
  }

  ModelKind kind_;
  Dims dims_;
};

}  // namespace codematch::match
