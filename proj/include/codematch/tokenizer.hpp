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
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codematch/util/binary_io.hpp"
#include "codematch/util/error.hpp"
#include "codematch/util/rng.hpp"
#include "codematch/util/utf8.hpp"

// Unigram language-model subword tokenizer: EM training with likelihood
// pruning, Viterbi segmentation and forward-filtering/backward-sampling.
namespace codematch::tok {

inline constexpr char32_t kBoundary = U'▁';  // "▁", prefixed to every word
inline constexpr std::string_view kUnkGlyph = "⁇";
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kNumSpecials = 2;
inline constexpr double kUnkPenalty = 10.0;
inline constexpr std::string_view kVocabMagic = "CMV1";

struct TokenSeq {
  std::vector<int> ids;
  std::size_t source_len = 0;  // code points in the original text

  bool operator==(const TokenSeq&) const = default;
};

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class SubwordVocab {
 public:
  struct Piece {
    std::string text;
    double log_prob = 0.0;
  };

  SubwordVocab() { entries_ = {{"<pad>", 0.0}, {"<unk>", 0.0}}; build_index(); }

  // Regular pieces only; specials are prepended as ids 0 and 1.
  static SubwordVocab from_pieces(std::vector<Piece> pieces) {
    SubwordVocab v;
    for (auto& p : pieces) {
      if (p.text.empty()) throw ValidationError("empty piece");
      if (!std::isfinite(p.log_prob)) throw ValidationError("non-finite log_prob for piece '" + p.text + "'");
      v.entries_.push_back(std::move(p));
    }
    v.build_index();
    return v;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  const std::string& piece(int id) const { return entries_.at(static_cast<std::size_t>(id)).text; }
  double log_prob(int id) const { return entries_.at(static_cast<std::size_t>(id)).log_prob; }
  const std::vector<Piece>& entries() const { return entries_; }
  double unk_score() const { return min_log_prob_ - kUnkPenalty; }

  std::optional<int> find(std::string_view piece) const {
    const auto cps = utf8::decode(piece);
    int node = 0;
    for (char32_t c : cps) {
      auto it = trie_[node].next.find(c);
      if (it == trie_[node].next.end()) return std::nullopt;
      node = it->second;
    }
    if (trie_[node].id < 0) return std::nullopt;
    return trie_[node].id;
  }

  // Calls fn(length, id) for every piece that is a prefix of text.
  template <typename Fn>
  void for_each_prefix(std::u32string_view text, Fn&& fn) const {
    int node = 0;
    for (std::size_t len = 1; len <= text.size(); ++len) {
      auto it = trie_[node].next.find(text[len - 1]);
      if (it == trie_[node].next.end()) return;
      node = it->second;
      if (trie_[node].id >= 0) fn(len, trie_[node].id);
    }
  }

  std::string serialize() const {
    std::string out;
    out += kVocabMagic;
    out += "\t" + std::to_string(size()) + "\tpad=" + std::to_string(kPadId) + "\tunk=" + std::to_string(kUnkId) + "\n";
    for (const auto& e : entries_) {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, e.log_prob);
      out += e.text;
      out += '\t';
      out.append(buf, res.ptr);
      out += '\n';
    }
    return out;
  }

  static SubwordVocab parse(std::string_view text, const std::string& what = "vocab") {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < text.size();) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      lines.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
    if (lines.empty() || !lines[0].starts_with(kVocabMagic)) throw FormatError(what + ": missing CMV1 header");
    const auto header = lines[0];
    const auto t1 = header.find('\t');
    const auto t2 = header.find('\t', t1 + 1);
    if (t1 == std::string_view::npos || t2 == std::string_view::npos) throw FormatError(what + ": malformed header");
    int declared = 0;
    auto sz = header.substr(t1 + 1, t2 - t1 - 1);
    if (std::from_chars(sz.data(), sz.data() + sz.size(), declared).ec != std::errc{}) {
      throw FormatError(what + ": bad vocab size in header");
    }
    if (header.substr(t2 + 1) != "pad=0\tunk=1") throw FormatError(what + ": unsupported specials layout");
    if (static_cast<int>(lines.size()) - 1 != declared) {
      throw FormatError(what + ": header declares " + std::to_string(declared) + " entries, file has " +
                        std::to_string(lines.size() - 1));
    }
    std::vector<Piece> pieces;
    for (std::size_t i = 1 + kNumSpecials; i < lines.size(); ++i) {
      const auto line = lines[i];
      const auto tab = line.rfind('\t');
      if (tab == std::string_view::npos) throw FormatError(what + ": line " + std::to_string(i + 1) + " has no tab");
      double lp = 0;
      auto num = line.substr(tab + 1);
      if (std::from_chars(num.data(), num.data() + num.size(), lp).ec != std::errc{}) {
        throw FormatError(what + ": bad log_prob on line " + std::to_string(i + 1));
      }
      pieces.push_back({std::string(line.substr(0, tab)), lp});
    }
    return from_pieces(std::move(pieces));
  }

  std::uint64_t content_hash() const { return fnv1a64(serialize()); }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static SubwordVocab load(const std::string& path) { return parse(read_file(path), path); }

 private:
  struct TrieNode {
    std::map<char32_t, int> next;
    int id = -1;
  };

  void build_index() {
    trie_.assign(1, TrieNode{});
    min_log_prob_ = 0.0;
    for (int id = kNumSpecials; id < size(); ++id) {
      const auto cps = utf8::decode(entries_[id].text);
      int node = 0;
      for (char32_t c : cps) {
        auto it = trie_[node].next.find(c);
        if (it == trie_[node].next.end()) {
          trie_.push_back({});
          const int child = static_cast<int>(trie_.size()) - 1;
          trie_[node].next.emplace(c, child);
          node = child;
        } else {
          node = it->second;
        }
      }
      if (trie_[node].id >= 0) throw ValidationError("duplicate piece '" + entries_[id].text + "'");
      trie_[node].id = id;
      min_log_prob_ = std::min(min_log_prob_, entries_[id].log_prob);
    }
  }

  std::vector<Piece> entries_;
  std::vector<TrieNode> trie_;
  double min_log_prob_ = 0.0;
};

// --- lattice -----------------------------------------------------------------

struct LatticeEdge {
  std::size_t begin;
  std::size_t end;
  int id;
  double score;
};

// Edges grouped by end position (index = end). A character with no
// single-character piece gets an unk edge.
inline std::vector<std::vector<LatticeEdge>> build_lattice(const SubwordVocab& vocab, std::u32string_view text) {
  std::vector<std::vector<LatticeEdge>> ending(text.size() + 1);
  for (std::size_t b = 0; b < text.size(); ++b) {
    bool has_single = false;
    vocab.for_each_prefix(text.substr(b), [&](std::size_t len, int id) {
      if (len == 1) has_single = true;
      ending[b + len].push_back({b, b + len, id, vocab.log_prob(id)});
    });
    if (!has_single) ending[b + 1].push_back({b, b + 1, kUnkId, vocab.unk_score()});
  }
  return ending;
}

// Maximum-probability segmentation of `text` (no word-boundary handling).
inline std::vector<int> segment_best(const SubwordVocab& vocab, std::u32string_view text) {
  const auto lattice = build_lattice(vocab, text);
  const auto n = text.size();
  std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
  std::vector<const LatticeEdge*> back(n + 1, nullptr);
  best[0] = 0.0;
  for (std::size_t e = 1; e <= n; ++e) {
    for (const auto& edge : lattice[e]) {
      const double s = best[edge.begin] + edge.score;
      if (s > best[e]) {
        best[e] = s;
        back[e] = &edge;
      }
    }
  }
  std::vector<int> ids;
  for (std::size_t e = n; e > 0; e = back[e]->begin) ids.push_back(back[e]->id);
  std::reverse(ids.begin(), ids.end());
  return ids;
}

// Draws a segmentation with probability proportional to P(seg)^alpha.
inline std::vector<int> segment_sample(const SubwordVocab& vocab, std::u32string_view text, double alpha, Rng& rng) {
  const auto lattice = build_lattice(vocab, text);
  const auto n = text.size();
  std::vector<double> fwd(n + 1, -std::numeric_limits<double>::infinity());
  fwd[0] = 0.0;
  for (std::size_t e = 1; e <= n; ++e) {
    for (const auto& edge : lattice[e]) fwd[e] = log_sum_exp(fwd[e], fwd[edge.begin] + alpha * edge.score);
  }
  std::vector<int> ids;
  for (std::size_t e = n; e > 0;) {
    const auto& edges = lattice[e];
    double u = rng.uniform();
    const LatticeEdge* chosen = &edges.back();
    for (const auto& edge : edges) {
      u -= std::exp(fwd[edge.begin] + alpha * edge.score - fwd[e]);
      if (u < 0) {
        chosen = &edge;
        break;
      }
    }
    ids.push_back(chosen->id);
    e = chosen->begin;
  }
  std::reverse(ids.begin(), ids.end());
  return ids;
}

inline double segmentation_score(const SubwordVocab& vocab, std::span<const int> ids) {
  double s = 0;
  for (int id : ids) s += id == kUnkId ? vocab.unk_score() : vocab.log_prob(id);
  return s;
}

// --- text-level encoding -------------------------------------------------------

// Whitespace-delimited words, each prefixed with the boundary marker.
inline std::vector<std::u32string> split_words(std::string_view text) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t c : utf8::decode(text)) {
    if (utf8::is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      if (cur.empty()) cur.push_back(kBoundary);
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

inline TokenSeq encode_best(const SubwordVocab& vocab, std::string_view text) {
  TokenSeq out;
  out.source_len = utf8::decode(text).size();
  for (const auto& w : split_words(text)) {
    auto ids = segment_best(vocab, w);
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
  }
  return out;
}

// Subword-regularized encoding; `alpha` is the sharpening exponent.
inline TokenSeq encode_sample(const SubwordVocab& vocab, std::string_view text, double alpha, std::uint64_t seed) {
  if (!(alpha > 0)) throw ValidationError("encode_sample: alpha must be > 0");
  Rng rng(seed);
  TokenSeq out;
  out.source_len = utf8::decode(text).size();
  for (const auto& w : split_words(text)) {
    auto ids = segment_sample(vocab, w, alpha, rng);
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
  }
  return out;
}

// Concatenates pieces; the boundary marker becomes a single space between
// words and unk renders as U+2047.
inline std::string decode(const SubwordVocab& vocab, const TokenSeq& seq) {
  std::string raw;
  for (int id : seq.ids) {
    if (id < 0 || id >= vocab.size()) throw ShapeError("decode: id " + std::to_string(id) + " out of range");
    if (id == kPadId) continue;
    raw += id == kUnkId ? std::string(kUnkGlyph) : vocab.piece(id);
  }
  std::string out;
  std::string boundary;
  utf8::append(boundary, kBoundary);
  for (std::size_t pos = 0; pos < raw.size();) {
    if (raw.compare(pos, boundary.size(), boundary) == 0) {
      if (!out.empty()) out += ' ';
      pos += boundary.size();
    } else {
      out += raw[pos++];
    }
  }
  return out;
}

// --- training ------------------------------------------------------------------

struct UnigramTrainerOptions {
  std::size_t max_piece_length = 6;
  std::uint64_t min_seed_frequency = 3;  // multi-character seeds need count > 2
  int em_iterations = 2;
  double prune_fraction = 0.2;
};

namespace detail {

using WordCounts = std::vector<std::pair<std::u32string, std::uint64_t>>;

inline WordCounts count_words(std::span<const std::string> texts) {
  std::map<std::u32string, std::uint64_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++counts[std::move(w)];
  }
  return {counts.begin(), counts.end()};
}

// Expected piece counts under the current model (forward-backward).
inline std::vector<double> expected_counts(const SubwordVocab& vocab, const WordCounts& words, double* log_likelihood) {
  std::vector<double> counts(vocab.size(), 0.0);
  double ll = 0;
  for (const auto& [word, freq] : words) {
    const auto lattice = build_lattice(vocab, word);
    const auto n = word.size();
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> fwd(n + 1, kNegInf), bwd(n + 1, kNegInf);
    fwd[0] = 0;
    for (std::size_t e = 1; e <= n; ++e) {
      for (const auto& edge : lattice[e]) fwd[e] = log_sum_exp(fwd[e], fwd[edge.begin] + edge.score);
    }
    bwd[n] = 0;
    for (std::size_t e = n; e > 0; --e) {
      for (const auto& edge : lattice[e]) bwd[edge.begin] = log_sum_exp(bwd[edge.begin], bwd[e] + edge.score);
    }
    const double z = fwd[n];
    ll += static_cast<double>(freq) * z;
    for (std::size_t e = 1; e <= n; ++e) {
      for (const auto& edge : lattice[e]) {
        counts[edge.id] += static_cast<double>(freq) * std::exp(fwd[edge.begin] + edge.score + bwd[e] - z);
      }
    }
  }
  if (log_likelihood) *log_likelihood = ll;
  return counts;
}

}  // namespace detail

// Trains a vocabulary of `vocab_size` entries including the two specials.
// If the corpus offers fewer candidate pieces, all of them are kept.
// Training is deterministic; `seed` only orders exact ties in pruning.
inline SubwordVocab train_unigram(std::span<const std::string> texts, int vocab_size, std::uint64_t seed,
                                  const UnigramTrainerOptions& opts = {}) {
  if (texts.empty()) throw ValidationError("train_unigram: no training texts");
  const auto words = detail::count_words(texts);
  if (words.empty()) throw ValidationError("train_unigram: training texts contain no words");

  std::map<std::u32string, std::uint64_t> substr_freq;
  std::map<char32_t, std::uint64_t> alphabet;
  for (const auto& [w, f] : words) {
    for (char32_t c : w) alphabet[c] += f;
    for (std::size_t b = 0; b < w.size(); ++b) {
      for (std::size_t len = 2; len <= opts.max_piece_length && b + len <= w.size(); ++len) {
        substr_freq[w.substr(b, len)] += f;
      }
    }
  }
  if (static_cast<std::size_t>(vocab_size) < alphabet.size() + kNumSpecials) {
    throw ValidationError("train_unigram: vocab_size " + std::to_string(vocab_size) + " cannot cover the " +
                          std::to_string(alphabet.size()) + "-character alphabet plus specials");
  }

  struct Cand {
    std::u32string text;
    double score;
    bool required;
  };
  std::vector<Cand> cands;
  double total = 0;
  for (const auto& [c, f] : alphabet) {
    cands.push_back({std::u32string(1, c), static_cast<double>(f), true});
    total += static_cast<double>(f);
  }
  for (const auto& [s, f] : substr_freq) {
    if (f < opts.min_seed_frequency) continue;
    const double w = static_cast<double>(f * s.size());
    cands.push_back({s, w, false});
    total += w;
  }
  for (auto& c : cands) c.score = std::log(c.score / total);

  auto make_vocab = [](const std::vector<Cand>& cs) {
    std::vector<SubwordVocab::Piece> pieces;
    pieces.reserve(cs.size());
    for (const auto& c : cs) pieces.push_back({utf8::encode(c.text), c.score});
    return SubwordVocab::from_pieces(std::move(pieces));
  };

  const auto target = static_cast<std::size_t>(vocab_size - kNumSpecials);
  constexpr double kMinCount = 1e-6;
  for (;;) {
    for (int it = 0; it < opts.em_iterations; ++it) {
      const auto vocab = make_vocab(cands);
      const auto counts = detail::expected_counts(vocab, words, nullptr);
      double sum = 0;
      for (std::size_t i = 0; i < cands.size(); ++i) sum += std::max(counts[i + kNumSpecials], kMinCount);
      for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].score = std::log(std::max(counts[i + kNumSpecials], kMinCount) / sum);
      }
    }
    if (cands.size() <= target) break;

    // Likelihood loss of removing each piece: its Viterbi frequency times
    // the log-probability gap to its best re-segmentation without it.
    const auto vocab = make_vocab(cands);
    std::vector<double> viterbi_freq(vocab.size(), 0.0);
    for (const auto& [w, f] : words) {
      for (int id : segment_best(vocab, w)) viterbi_freq[id] += static_cast<double>(f);
    }
    struct Loss {
      double loss;
      std::uint64_t tie;
      std::size_t index;
    };
    std::vector<Loss> losses;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].required) continue;
      const int id = static_cast<int>(i) + kNumSpecials;
      double alt = 0;
      {
        // Segment the piece with the piece itself excluded.
        const auto& text = cands[i].text;
        const auto n = text.size();
        std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
        best[0] = 0;
        const auto lattice = build_lattice(vocab, text);
        for (std::size_t e = 1; e <= n; ++e) {
          for (const auto& edge : lattice[e]) {
            if (edge.id == id) continue;
            best[e] = std::max(best[e], best[edge.begin] + edge.score);
          }
        }
        alt = best[n];
      }
      const double loss = viterbi_freq[id] * (cands[i].score - alt);
      losses.push_back({loss, mix_seed(seed, fnv1a64(utf8::encode(cands[i].text))), i});
    }
    std::sort(losses.begin(), losses.end(), [](const Loss& a, const Loss& b) {
      return a.loss != b.loss ? a.loss < b.loss : a.tie < b.tie;
    });
    const auto excess = cands.size() - target;
    auto drop = static_cast<std::size_t>(std::ceil(opts.prune_fraction * static_cast<double>(cands.size())));
    drop = std::min({drop, excess, losses.size()});
    if (drop == 0) break;
    std::vector<bool> dead(cands.size(), false);
    for (std::size_t k = 0; k < drop; ++k) dead[losses[k].index] = true;
    std::vector<Cand> kept;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!dead[i]) kept.push_back(std::move(cands[i]));
    }
    cands = std::move(kept);
  }

  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.score != b.score ? a.score > b.score : a.text < b.text;
  });
  return make_vocab(cands);
}

}  // namespace codematch::tok
