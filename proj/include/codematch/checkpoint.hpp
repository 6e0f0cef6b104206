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

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "codematch/nn/param_store.hpp"
#include "codematch/tokenizer.hpp"
#include "codematch/util/binary_io.hpp"
#include "codematch/util/error.hpp"

// CMK1 checkpoint: config echo, vocab hashes and texts, then name-sorted
// parameters as (name, rows, cols, float32 LE values).
namespace codematch::ckpt {

inline constexpr std::string_view kCheckpointMagic = "CMK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;
  tok::SubwordVocab code_vocab;
  tok::SubwordVocab text_vocab;
  nn::ParamStore<float> params;
};

inline std::string serialize(const Checkpoint& c) {
  BinaryWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(c.config.dump());
  const auto code = c.code_vocab.serialize();
  const auto text = c.text_vocab.serialize();
  w.u64(fnv1a64(code));
  w.u64(fnv1a64(text));
  w.str(code);
  w.str(text);
  w.u32(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, t] : c.params.all()) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    w.f32s(std::span<const float>(t.data));
  }
  return w.bytes();
}

inline Checkpoint deserialize(std::string_view bytes, const std::string& what) {
  BinaryReader r(bytes, what);
  if (bytes.size() < 4 || r.raw(4) != kCheckpointMagic) throw FormatError(what + ": bad magic (expected CMK1)");
  if (auto v = r.u32(); v != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint c;
  try {
    c.config = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": corrupt config echo: " + e.what());
  }
  const auto code_hash = r.u64();
  const auto text_hash = r.u64();
  const auto code = r.str();
  const auto text = r.str();
  if (fnv1a64(code) != code_hash || fnv1a64(text) != text_hash) throw FormatError(what + ": vocab hash mismatch");
  c.code_vocab = tok::SubwordVocab::parse(code, what + " (code vocab)");
  c.text_vocab = tok::SubwordVocab::parse(text, what + " (text vocab)");
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto name = r.str();
    const auto rows = static_cast<int>(r.u32());
    const auto cols = static_cast<int>(r.u32());
    if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) * cols > bytes.size()) {
      throw FormatError(what + ": implausible shape for '" + name + "'");
    }
    auto& t = c.params.add(name, rows, cols);
    for (auto& v : t.data) v = r.f32();
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return c;
}

inline void save(const Checkpoint& c, const std::string& path) { write_file(path, serialize(c)); }

inline Checkpoint load(const std::string& path) { return deserialize(read_file(path), path); }

}  // namespace codematch::ckpt
