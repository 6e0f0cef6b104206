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
#include <cctype>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codematch/util/binary_io.hpp"
#include "codematch/util/error.hpp"
#include "codematch/util/rng.hpp"

namespace codematch::corpus {

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };

inline const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

// One code/description pair. Ids are positions in the source file.
struct Sample {
  int id = 0;
  std::string code;
  std::string description;

  bool operator==(const Sample&) const = default;
};

// <code, positive description, negative description>, as sample ids.
struct Triplet {
  int code_id = 0;
  int pos_id = 0;
  int neg_id = 0;

  auto operator<=>(const Triplet&) const = default;
};

struct Corpus {
  std::vector<Sample> train;
  std::vector<Sample> test;

  const std::vector<Sample>& split(Split s) const { return s == Split::kTrain ? train : test; }
};

namespace detail {

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline std::string string_field(const nlohmann::json& rec, const char* key, std::size_t index) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError("record " + std::to_string(index) + ": field '" + key +
                     "' missing or not a string");
  }
  return it->get<std::string>();
}

}  // namespace detail

// Parses a CoNaLa-format JSON array. The description is `rewritten_intent`
// when present and non-null, otherwise `intent`.
inline std::vector<Sample> parse_corpus_json(std::string_view text, std::string_view what = "corpus") {
  using nlohmann::json;
  std::size_t completed = 0;
  json::parser_callback_t count_records = [&](int depth, json::parse_event_t event, json&) {
    if (depth == 1 && event == json::parse_event_t::object_end) ++completed;
    return true;
  };
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), count_records);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON in record " + std::to_string(completed) +
                     ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(std::string(what) + ": top level must be a JSON array");

  std::vector<Sample> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    if (!rec.is_object()) throw ParseError("record " + std::to_string(i) + ": not an object");
    Sample s;
    s.id = static_cast<int>(i);
    s.code = detail::string_field(rec, "snippet", i);
    auto rw = rec.find("rewritten_intent");
    if (rw != rec.end() && rw->is_string()) {
      s.description = rw->get<std::string>();
    } else {
      s.description = detail::string_field(rec, "intent", i);
    }
    if (detail::blank(s.code)) {
      throw ValidationError(std::string(what) + ": record id " + std::to_string(i) + " has an empty snippet");
    }
    if (detail::blank(s.description)) {
      throw ValidationError(std::string(what) + ": record id " + std::to_string(i) + " has an empty description");
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> load_corpus(const std::string& path, Split split) {
  return parse_corpus_json(read_file(path), path + " (" + split_name(split) + ")");
}

// k negatives per anchor, drawn uniformly without replacement from the
// other samples. Output order: anchors in id order, negatives in draw order.
inline std::vector<Triplet> make_triplets(std::span<const Sample> samples, int negatives_per_pair,
                                          std::uint64_t seed) {
  const auto n = samples.size();
  if (n < 2) throw ValidationError("cannot sample negatives: need at least 2 samples");
  if (negatives_per_pair < 1) throw ValidationError("negatives_per_pair must be >= 1");
  if (static_cast<std::size_t>(negatives_per_pair) > n - 1) {
    throw ValidationError("negatives_per_pair " + std::to_string(negatives_per_pair) +
                          " exceeds the " + std::to_string(n - 1) + " available negatives");
  }
  Rng rng(seed);
  std::vector<Triplet> out;
  out.reserve(n * negatives_per_pair);
  std::vector<int> pool;
  pool.reserve(n - 1);
  for (std::size_t a = 0; a < n; ++a) {
    pool.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != a) pool.push_back(samples[j].id);
    }
    for (int k = 0; k < negatives_per_pair; ++k) {
      const auto pick = k + rng.below(pool.size() - k);
      std::swap(pool[k], pool[pick]);
      out.push_back({samples[a].id, samples[a].id, pool[k]});
    }
  }
  return out;
}

// --- CMC1 binary corpus ----------------------------------------------------

inline constexpr std::string_view kCorpusMagic = "CMC1";
inline constexpr std::uint32_t kCorpusVersion = 1;

inline std::string serialize_corpus(const Corpus& c) {
  BinaryWriter w;
  w.raw(kCorpusMagic);
  w.u32(kCorpusVersion);
  for (Split s : {Split::kTrain, Split::kTest}) {
    const auto& samples = c.split(s);
    w.u8(static_cast<std::uint8_t>(s));
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& smp : samples) {
      w.u32(static_cast<std::uint32_t>(smp.id));
      w.str(smp.code);
      w.str(smp.description);
    }
  }
  return w.bytes();
}

inline Corpus deserialize_corpus(std::string_view bytes, const std::string& what) {
  BinaryReader r(bytes, what);
  if (bytes.size() < 4 || r.raw(4) != kCorpusMagic) throw FormatError(what + ": bad magic (expected CMC1)");
  if (auto v = r.u32(); v != kCorpusVersion) {
    throw FormatError(what + ": unsupported corpus version " + std::to_string(v));
  }
  Corpus c;
  for (Split s : {Split::kTrain, Split::kTest}) {
    if (r.u8() != static_cast<std::uint8_t>(s)) throw FormatError(what + ": split tag out of order");
    auto& samples = s == Split::kTrain ? c.train : c.test;
    samples.resize(r.u32());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i].id = static_cast<int>(r.u32());
      if (samples[i].id != static_cast<int>(i)) throw FormatError(what + ": non-contiguous sample ids");
      samples[i].code = r.str();
      samples[i].description = r.str();
    }
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return c;
}

inline void save_corpus(const Corpus& c, const std::string& path) { write_file(path, serialize_corpus(c)); }

inline Corpus load_corpus_file(const std::string& path) { return deserialize_corpus(read_file(path), path); }

// Loads one split from either a CMC1 file or a raw CoNaLa JSON array.
inline std::vector<Sample> load_split(const std::string& path, Split split) {
  const auto bytes = read_file(path);
  if (bytes.starts_with(kCorpusMagic)) return deserialize_corpus(bytes, path).split(split);
  return parse_corpus_json(bytes, path + " (" + split_name(split) + ")");
}

}  // namespace codematch::corpus
