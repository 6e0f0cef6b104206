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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codematch/util/error.hpp"
#include "codematch/util/utf8.hpp"

namespace codematch::ast {

// Parsed snippet tree. `value` is set only on identifier and literal leaves.
// Node types never contain '_' (the SBT label separator).
struct AstNode {
  std::string type;
  std::optional<std::string> value;
  std::vector<AstNode> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const AstNode&) const = default;
};

inline AstNode make_leaf(std::string type, std::optional<std::string> value = std::nullopt) {
  return {std::move(type), std::move(value), {}};
}

inline AstNode make_node(std::string type, std::vector<AstNode> children) {
  return {std::move(type), std::nullopt, std::move(children)};
}

// Single-node tree standing in for a snippet the backend cannot parse.
inline AstNode unparsed_tree() { return make_leaf("Unparsed"); }

inline std::size_t node_count(const AstNode& n) {
  std::size_t c = 1;
  for (const auto& ch : n.children) c += node_count(ch);
  return c;
}

inline std::size_t tree_depth(const AstNode& n) {
  std::size_t d = 0;
  for (const auto& ch : n.children) d = std::max(d, tree_depth(ch));
  return d + 1;
}

// Whitespace inside values becomes U+2423 so SBT tokens never contain it.
inline std::string sanitize_value(std::string_view raw) {
  std::string out;
  for (char32_t c : utf8::decode(raw)) {
    utf8::append(out, utf8::is_space(c) ? U'␣' : c);
  }
  return out;
}

inline std::string label(const AstNode& n) { return n.value ? n.type + "_" + *n.value : n.type; }

// --- SBT -------------------------------------------------------------------

using SbtString = std::vector<std::string>;

inline void sbt_append(const AstNode& n, SbtString& out) {
  const auto l = label(n);
  out.emplace_back("(");
  out.push_back(l);
  for (const auto& ch : n.children) sbt_append(ch, out);
  out.emplace_back(")");
  out.push_back(l);
}

// Each node contributes "(", label, children..., ")", label.
inline SbtString sbt_serialize(const AstNode& tree) {
  SbtString out;
  out.reserve(4 * node_count(tree));
  sbt_append(tree, out);
  return out;
}

inline std::string sbt_join(const SbtString& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

class SbtError : public ParseError {
 public:
  SbtError(const std::string& msg, std::size_t index)
      : ParseError("SBT token " + std::to_string(index) + ": " + msg), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

inline AstNode node_from_label(std::string_view l) {
  const auto us = l.find('_');
  if (us == std::string_view::npos) return make_leaf(std::string(l));
  return make_leaf(std::string(l.substr(0, us)), std::string(l.substr(us + 1)));
}

inline AstNode sbt_parse(std::span<const std::string> tokens) {
  struct Frame {
    AstNode node;
    std::string label;
  };
  std::vector<Frame> stack;
  std::optional<AstNode> root;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (root) throw SbtError("tokens after the root node closed", i);
    if (tokens[i] == "(") {
      if (i + 1 >= tokens.size()) throw SbtError("missing label after '('", i + 1);
      const auto& l = tokens[i + 1];
      if (l == "(" || l == ")" || l.empty()) throw SbtError("expected a node label", i + 1);
      stack.push_back({node_from_label(l), l});
      i += 2;
    } else if (tokens[i] == ")") {
      if (stack.empty()) throw SbtError("unbalanced ')'", i);
      if (i + 1 >= tokens.size()) throw SbtError("missing label after ')'", i + 1);
      if (tokens[i + 1] != stack.back().label) {
        throw SbtError("close label '" + tokens[i + 1] + "' does not match '" + stack.back().label + "'", i + 1);
      }
      AstNode done = std::move(stack.back().node);
      stack.pop_back();
      if (stack.empty()) {
        root = std::move(done);
      } else {
        stack.back().node.children.push_back(std::move(done));
      }
      i += 2;
    } else {
      throw SbtError("expected '(' or ')', got '" + tokens[i] + "'", i);
    }
  }
  if (!stack.empty()) throw SbtError("unclosed node '" + stack.back().label + "'", tokens.size());
  if (!root) throw SbtError("empty SBT string", 0);
  return std::move(*root);
}

// --- tree JSON ---------------------------------------------------------------

inline nlohmann::json tree_to_json(const AstNode& n) {
  nlohmann::json j;
  j["type"] = n.type;
  j["value"] = n.value ? nlohmann::json(*n.value) : nlohmann::json(nullptr);
  j["children"] = nlohmann::json::array();
  for (const auto& c : n.children) j["children"].push_back(tree_to_json(c));
  return j;
}

inline AstNode tree_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ParseError("tree node must be an object with a string 'type'");
  }
  AstNode n;
  n.type = j["type"].get<std::string>();
  if (n.type.empty() || n.type.find('_') != std::string::npos || n.type == "(" || n.type == ")") {
    throw ValidationError("invalid node type '" + n.type + "'");
  }
  if (auto it = j.find("value"); it != j.end() && it->is_string()) n.value = sanitize_value(it->get<std::string>());
  if (auto it = j.find("children"); it != j.end()) {
    if (!it->is_array()) throw ParseError("'children' must be an array");
    for (const auto& c : *it) n.children.push_back(tree_from_json(c));
  }
  return n;
}

// --- backends ------------------------------------------------------------------

// AST for one snippet, or nullopt when the backend cannot parse it.
class ParserBackend {
 public:
  virtual ~ParserBackend() = default;
  virtual std::optional<AstNode> parse(int sample_id, std::string_view code) const = 0;
};

// Trees produced offline (tools/pyast_export.py), keyed by sample id; a
// null tree marks an unparseable snippet.
class PreparsedBackend : public ParserBackend {
 public:
  static PreparsedBackend from_json(std::string_view text, const std::string& what = "trees") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(what + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(what + ": expected a JSON array");
    PreparsedBackend b;
    for (const auto& rec : doc) {
      if (!rec.is_object() || !rec.contains("id")) throw ParseError(what + ": record without 'id'");
      const int id = rec["id"].get<int>();
      const auto& t = rec.contains("tree") ? rec["tree"] : nlohmann::json(nullptr);
      b.trees_[id] = t.is_null() ? std::nullopt : std::optional<AstNode>(tree_from_json(t));
    }
    return b;
  }

  std::optional<AstNode> parse(int sample_id, std::string_view) const override {
    auto it = trees_.find(sample_id);
    if (it == trees_.end()) throw ValidationError("pre-parsed tree file has no entry for sample id " + std::to_string(sample_id));
    return it->second;
  }

  std::size_t size() const { return trees_.size(); }

 private:
  std::map<int, std::optional<AstNode>> trees_;
};

struct ParseOutcome {
  AstNode tree;
  bool fallback = false;
};

// Fallback trees are the single node `Unparsed`.
inline ParseOutcome parse_snippet(int sample_id, std::string_view code, const ParserBackend& backend) {
  if (auto t = backend.parse(sample_id, code)) return {std::move(*t), false};
  return {unparsed_tree(), true};
}

}  // namespace codematch::ast
