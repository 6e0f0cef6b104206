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
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codematch/ast.hpp"
#include "codematch/util/error.hpp"

// Embedded parser for the snippet language (Python 3). Produces trees in the
// node mapping of tools/pyast_export.py: CPython node class names, children
// in field order, contexts dropped, identifier/literal leaves valued.
namespace codematch::ast::python {

class SyntaxError : public ParseError {
 public:
  SyntaxError(const std::string& msg, int line) : ParseError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Tok { kName, kNumber, kString, kOp, kNewline, kIndent, kDedent, kEnd };

struct Token {
  Tok kind;
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source
  std::size_t end = 0;
  int line = 1;
  bool is_bytes = false;
  bool is_fstring = false;
};

inline constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async", "await",  "break",
    "class", "continue", "def",   "del",      "elif",   "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",     "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",    "while",  "with",  "yield"};

inline bool is_keyword(std::string_view s) {
  return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end();
}

namespace detail {

inline bool ascii_ident_start(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool ascii_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Approximates XID_Start/XID_Continue for non-ASCII code points: letters
// pass, punctuation and symbol blocks are rejected.
inline bool unicode_ident_char(char32_t cp) {
  if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xE000 && cp <= 0xF8FF) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF20) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
  return cp != 0xFFFD;
}

// Decodes one code point at `pos`; returns its byte length (0 if invalid).
inline int decode_at(std::string_view s, std::size_t pos, char32_t& cp) {
  const auto c = static_cast<unsigned char>(s[pos]);
  int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
  if (len == 0 || pos + len > s.size()) return 0;
  cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
  for (int k = 1; k < len; ++k) {
    const auto cc = static_cast<unsigned char>(s[pos + k]);
    if ((cc >> 6) != 0x2) return 0;
    cp = (cp << 6) | (cc & 0x3f);
  }
  return len;
}

inline constexpr std::array<std::string_view, 48> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=", "-=",
    "*=",  "/=",  "%=",  "&=",  "|=",  "^=", "@=", ":=", "+",  "-",  "*",  "/",  "%",  "@",  "&",  "|",
    "^",   "~",   "<",   ">",   "(",   ")",  "[",  "]",  "{",  "}",  ",",  ":",  ".",  ";",  "=",  "!"};

}  // namespace detail

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    bool at_line_start = true;
    while (true) {
      if (at_line_start && brackets_.empty()) {
        if (!indentation()) break;
        at_line_start = false;
      }
      while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\f')) ++pos_;
      if (pos_ >= src_.size()) break;
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
        continue;
      }
      if (c == '\\') {
        if (pos_ + 1 >= src_.size()) fail("unexpected EOF while parsing");
        if (src_[pos_ + 1] == '\n') {
          pos_ += 2;
        } else if (src_[pos_ + 1] == '\r') {
          pos_ += (pos_ + 2 < src_.size() && src_[pos_ + 2] == '\n') ? 3 : 2;
        } else {
          fail("unexpected character after line continuation character");
        }
        ++line_;
        continue;
      }
      if (c == '\n' || c == '\r') {
        const std::size_t b = pos_;
        pos_ += (c == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ? 2 : 1;
        if (brackets_.empty()) {
          emit(Tok::kNewline, b, pos_);
          at_line_start = true;
        }
        ++line_;
        continue;
      }
      lex_token();
    }
    if (!brackets_.empty()) fail(std::string("'") + brackets_.back() + "' was never closed");
    if (!at_line_start) emit(Tok::kNewline, pos_, pos_);
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit(Tok::kDedent, pos_, pos_);
    }
    emit(Tok::kEnd, pos_, pos_);
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, line_); }

  void emit(Tok kind, std::size_t b, std::size_t e) {
    out_.push_back({kind, std::string(src_.substr(b, e - b)), b, e, line_});
  }

  // Handles indentation at the start of a logical line; skips blank and
  // comment-only lines. Returns false at end of input.
  bool indentation() {
    while (true) {
      int col = 0;
      int alt = 0;  // tab size 1, for the tab/space consistency check
      std::size_t p = pos_;
      while (p < src_.size()) {
        const char c = src_[p];
        if (c == ' ') {
          ++col;
          ++alt;
        } else if (c == '\t') {
          col = (col / 8 + 1) * 8;
          ++alt;
        } else if (c == '\f') {
          col = alt = 0;
        } else {
          break;
        }
        ++p;
      }
      if (p >= src_.size()) {
        pos_ = p;
        return false;
      }
      const char c = src_[p];
      if (c == '#' || c == '\n' || c == '\r') {
        while (p < src_.size() && src_[p] != '\n' && src_[p] != '\r') ++p;
        if (p < src_.size()) {
          p += (src_[p] == '\r' && p + 1 < src_.size() && src_[p + 1] == '\n') ? 2 : 1;
          ++line_;
        }
        pos_ = p;
        continue;
      }
      pos_ = p;
      if (col > indents_.back().first) {
        if (alt <= indents_.back().second) fail("inconsistent use of tabs and spaces in indentation");
        indents_.emplace_back(col, alt);
        emit(Tok::kIndent, p, p);
      } else {
        while (col < indents_.back().first) {
          indents_.pop_back();
          emit(Tok::kDedent, p, p);
        }
        if (col != indents_.back().first) fail("unindent does not match any outer indentation level");
        if (alt != indents_.back().second) fail("inconsistent use of tabs and spaces in indentation");
      }
      return true;
    }
  }

  bool ident_char_at(std::size_t p, int* len) const {
    if (p >= src_.size()) return false;
    const auto c = static_cast<unsigned char>(src_[p]);
    if (detail::ascii_ident_start(c) || detail::ascii_digit(c)) {
      *len = 1;
      return true;
    }
    if (c < 0x80) return false;
    char32_t cp = 0;
    *len = detail::decode_at(src_, p, cp);
    return *len > 0 && detail::unicode_ident_char(cp);
  }

  void lex_token() {
    const std::size_t b = pos_;
    const auto c = static_cast<unsigned char>(src_[pos_]);
    int len = 0;
    if (!detail::ascii_digit(c) && ident_char_at(pos_, &len)) {
      std::size_t p = pos_;
      while (ident_char_at(p, &len)) p += len;
      std::string word(src_.substr(b, p - b));
      if (p < src_.size() && (src_[p] == '\'' || src_[p] == '"') && string_prefix(word)) {
        pos_ = p;
        lex_string(b, word);
        return;
      }
      pos_ = p;
      emit(Tok::kName, b, p);
      return;
    }
    if (detail::ascii_digit(c) || (c == '.' && pos_ + 1 < src_.size() && detail::ascii_digit(src_[pos_ + 1]))) {
      lex_number();
      return;
    }
    if (c == '\'' || c == '"') {
      lex_string(b, "");
      return;
    }
    for (auto op : detail::kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        if (op == "!") fail("invalid syntax");
        pos_ += op.size();
        if (op == "(" || op == "[" || op == "{") {
          brackets_.push_back(op[0]);
          if (brackets_.size() > 200) fail("too many nested parentheses");
        } else if (op == ")" || op == "]" || op == "}") {
          const char open = op == ")" ? '(' : op == "]" ? '[' : '{';
          if (brackets_.empty() || brackets_.back() != open) fail("unmatched '" + std::string(op) + "'");
          brackets_.pop_back();
        }
        emit(Tok::kOp, b, pos_);
        return;
      }
    }
    fail("invalid character in source");
  }

  static bool string_prefix(std::string w) {
    for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return w == "r" || w == "u" || w == "b" || w == "f" || w == "br" || w == "rb" || w == "fr" || w == "rf";
  }

  void lex_string(std::size_t b, std::string prefix) {
    for (auto& ch : prefix) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const char q = src_[pos_];
    const bool triple = src_.substr(pos_, 3) == std::string(3, q);
    pos_ += triple ? 3 : 1;
    const std::size_t body = pos_;
    const int start_line = line_;
    while (true) {
      if (pos_ >= src_.size()) {
        line_ = start_line;
        fail(triple ? "unterminated triple-quoted string literal" : "unterminated string literal");
      }
      const char ch = src_[pos_];
      if (ch == '\\') {
        if (pos_ + 1 < src_.size() && (src_[pos_ + 1] == '\n' || src_[pos_ + 1] == '\r')) ++line_;
        pos_ += 2;
        if (pos_ > src_.size()) pos_ = src_.size();
        continue;
      }
      if (triple && src_.substr(pos_, 3) == std::string(3, q)) {
        pos_ += 3;
        break;
      }
      if (!triple && ch == q) {
        ++pos_;
        break;
      }
      if (ch == '\n' || ch == '\r') {
        if (!triple) fail("unterminated string literal");
        ++line_;
      }
      ++pos_;
    }
    const bool bytes = prefix.find('b') != std::string::npos;
    if (bytes) {
      for (std::size_t p = body; p < pos_; ++p) {
        if (static_cast<unsigned char>(src_[p]) >= 0x80) fail("bytes can only contain ASCII literal characters");
      }
    }
    emit(Tok::kString, b, pos_);
    out_.back().is_bytes = bytes;
    out_.back().is_fstring = prefix.find('f') != std::string::npos;
  }

  bool digit_at(std::size_t p, bool (*ok)(char)) const { return p < src_.size() && ok(src_[p]); }

  // digit (_? digit)*; returns false if no digit at pos_.
  bool digit_part(bool (*ok)(char)) {
    if (!digit_at(pos_, ok)) return false;
    ++pos_;
    while (true) {
      if (digit_at(pos_, ok)) {
        ++pos_;
      } else if (pos_ < src_.size() && src_[pos_] == '_' && digit_at(pos_ + 1, ok)) {
        pos_ += 2;
      } else {
        return true;
      }
    }
  }

  void lex_number() {
    static constexpr auto dec = [](char ch) { return ch >= '0' && ch <= '9'; };
    static constexpr auto hex = [](char ch) {
      return (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f') || (ch >= 'A' && ch <= 'F');
    };
    static constexpr auto oct = [](char ch) { return ch >= '0' && ch <= '7'; };
    static constexpr auto bin = [](char ch) { return ch == '0' || ch == '1'; };
    const std::size_t b = pos_;
    if (src_[pos_] == '0' && pos_ + 1 < src_.size() && std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
      const char kind = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ + 1])));
      pos_ += 2;
      if (pos_ < src_.size() && src_[pos_] == '_') ++pos_;
      bool (*ok)(char) = kind == 'x' ? +hex : kind == 'o' ? +oct : +bin;
      if (!digit_part(ok)) {
        fail(kind == 'x' ? "invalid hexadecimal literal" : kind == 'o' ? "invalid octal literal" : "invalid binary literal");
      }
      end_of_number(b);
      return;
    }
    bool is_float = false;
    bool nonzero_int = false;
    if (src_[pos_] == '.') {
      ++pos_;
      digit_part(+dec);
      is_float = true;
    } else {
      digit_part(+dec);
      for (std::size_t p = b; p < pos_; ++p) nonzero_int |= (src_[p] >= '1' && src_[p] <= '9');
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        is_float = true;
        digit_part(+dec);
      }
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (!digit_at(p, +dec)) fail("invalid decimal literal");
      pos_ = p;
      digit_part(+dec);
      is_float = true;
    }
    bool imag = false;
    if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) {
      ++pos_;
      imag = true;
    }
    if (!is_float && !imag && src_[b] == '0' && nonzero_int) {
      fail("leading zeros in decimal integer literals are not permitted");
    }
    end_of_number(b);
  }

  // A number may be directly followed only by a handful of keywords.
  void end_of_number(std::size_t b) {
    int len = 0;
    if (ident_char_at(pos_, &len)) {
      static constexpr std::array<std::string_view, 8> kAllowed = {"and", "else", "for", "if", "in", "is", "not", "or"};
      const auto rest = src_.substr(pos_);
      const bool ok = std::any_of(kAllowed.begin(), kAllowed.end(), [&](std::string_view kw) { return rest.starts_with(kw); });
      if (!ok) fail("invalid decimal literal");
    }
    emit(Tok::kNumber, b, pos_);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::vector<std::pair<int, int>> indents_{{0, 0}};
  std::vector<char> brackets_;
  std::vector<Token> out_;
};

inline std::vector<Token> tokenize(std::string_view src) { return Lexer(src).run(); }

class Parser {
 public:
  Parser(std::string_view src, std::vector<Token> tokens) : src_(src), toks_(std::move(tokens)) {}

  // Statement mode: root "Module".
  AstNode parse_module() {
    std::vector<AstNode> body;
    while (!at(Tok::kEnd)) {
      if (accept(Tok::kNewline)) continue;
      statement(body);
    }
    return make_node("Module", std::move(body));
  }

  // Expression mode: root "Expression".
  AstNode parse_expression() {
    AstNode body = expressions();
    while (accept(Tok::kNewline)) {
    }
    if (!at(Tok::kEnd)) fail("invalid syntax");
    return make_node("Expression", {std::move(body)});
  }

 private:
  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > 400) p_.fail("too many nested expressions");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  // --- token helpers ---------------------------------------------------------

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  bool at(Tok kind) const { return peek().kind == kind; }
  bool at_op(std::string_view op, std::size_t k = 0) const { return peek(k).kind == Tok::kOp && peek(k).text == op; }
  bool at_kw(std::string_view kw, std::size_t k = 0) const { return peek(k).kind == Tok::kName && peek(k).text == kw; }
  bool at_identifier(std::size_t k = 0) const { return peek(k).kind == Tok::kName && !is_keyword(peek(k).text); }
  const Token& next() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }
  bool accept(Tok kind) {
    if (!at(kind)) return false;
    next();
    return true;
  }
  bool accept_op(std::string_view op) {
    if (!at_op(op)) return false;
    next();
    return true;
  }
  bool accept_kw(std::string_view kw) {
    if (!at_kw(kw)) return false;
    next();
    return true;
  }
  void expect_op(std::string_view op) {
    if (!accept_op(op)) fail("expected '" + std::string(op) + "'");
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail("expected '" + std::string(kw) + "'");
  }
  std::string expect_identifier() {
    if (!at_identifier()) fail("expected a name");
    return next().text;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, peek().line); }

  static AstNode identifier(std::string s) { return make_leaf("Identifier", sanitize_value(s)); }
  static void push_opt(std::vector<AstNode>& v, std::optional<AstNode> n) {
    if (n) v.push_back(std::move(*n));
  }
  static void append(std::vector<AstNode>& v, std::vector<AstNode> more) {
    for (auto& n : more) v.push_back(std::move(n));
  }

  bool can_start_expression() const {
    const auto& t = peek();
    switch (t.kind) {
      case Tok::kNumber:
      case Tok::kString:
        return true;
      case Tok::kName:
        return !is_keyword(t.text) || t.text == "None" || t.text == "True" || t.text == "False" || t.text == "not" ||
               t.text == "lambda" || t.text == "await";
      case Tok::kOp:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" || t.text == "~" ||
               t.text == "*" || t.text == "...";
      default:
        return false;
    }
  }

  // --- statements -------------------------------------------------------------

  void statement(std::vector<AstNode>& out) {
    DepthGuard guard(*this);
    if (at_kw("if")) return out.push_back(if_stmt("if"));
    if (at_kw("while")) return out.push_back(while_stmt());
    if (at_kw("for")) return out.push_back(for_stmt(false));
    if (at_kw("try")) return out.push_back(try_stmt());
    if (at_kw("with")) return out.push_back(with_stmt(false));
    if (at_kw("def")) return out.push_back(funcdef({}, false));
    if (at_kw("class")) return out.push_back(classdef({}));
    if (at_op("@")) return out.push_back(decorated());
    if (at_kw("async")) {
      next();
      if (at_kw("def")) return out.push_back(funcdef({}, true));
      if (at_kw("for")) return out.push_back(for_stmt(true));
      if (at_kw("with")) return out.push_back(with_stmt(true));
      fail("invalid syntax");
    }
    simple_stmts(out);
  }

  void simple_stmts(std::vector<AstNode>& out) {
    out.push_back(simple_stmt());
    while (accept_op(";")) {
      if (at(Tok::kNewline)) break;
      out.push_back(simple_stmt());
    }
    if (!accept(Tok::kNewline)) fail("invalid syntax");
  }

  std::vector<AstNode> block() {
    expect_op(":");
    std::vector<AstNode> body;
    if (accept(Tok::kNewline)) {
      if (!accept(Tok::kIndent)) fail("expected an indented block");
      while (!accept(Tok::kDedent)) {
        if (at(Tok::kEnd)) fail("unexpected end of input");
        statement(body);
      }
    } else {
      simple_stmts(body);
    }
    return body;
  }

  AstNode if_stmt(std::string_view kw) {
    expect_kw(kw);
    std::vector<AstNode> ch;
    ch.push_back(named_expression());
    append(ch, block());
    if (at_kw("elif")) {
      ch.push_back(if_stmt("elif"));
    } else if (accept_kw("else")) {
      append(ch, block());
    }
    return make_node("If", std::move(ch));
  }

  AstNode while_stmt() {
    expect_kw("while");
    std::vector<AstNode> ch;
    ch.push_back(named_expression());
    append(ch, block());
    if (accept_kw("else")) append(ch, block());
    return make_node("While", std::move(ch));
  }

  AstNode for_stmt(bool async) {
    expect_kw("for");
    std::vector<AstNode> ch;
    ch.push_back(star_targets());
    expect_kw("in");
    ch.push_back(star_expressions());
    append(ch, block());
    if (accept_kw("else")) append(ch, block());
    return make_node(async ? "AsyncFor" : "For", std::move(ch));
  }

  AstNode try_stmt() {
    expect_kw("try");
    std::vector<AstNode> ch = block();
    bool handlers = false;
    while (at_kw("except")) {
      next();
      handlers = true;
      std::vector<AstNode> h;
      if (!at_op(":")) {
        h.push_back(expression());
        if (accept_kw("as")) h.push_back(identifier(expect_identifier()));
      }
      append(h, block());
      ch.push_back(make_node("ExceptHandler", std::move(h)));
    }
    bool finally = false;
    if (handlers && accept_kw("else")) append(ch, block());
    if (accept_kw("finally")) {
      append(ch, block());
      finally = true;
    }
    if (!handlers && !finally) fail("expected 'except' or 'finally' block");
    return make_node("Try", std::move(ch));
  }

  AstNode with_stmt(bool async) {
    expect_kw("with");
    std::vector<AstNode> ch;
    const std::size_t save = i_;
    bool parsed = false;
    if (at_op("(")) {
      // Parenthesized item list; falls back to an ordinary expression item.
      try {
        next();
        std::vector<AstNode> items;
        items.push_back(with_item());
        while (accept_op(",")) {
          if (at_op(")")) break;
          items.push_back(with_item());
        }
        expect_op(")");
        if (!at_op(":")) throw SyntaxError("not a parenthesized item list", peek().line);
        ch = std::move(items);
        parsed = true;
      } catch (const SyntaxError&) {
        i_ = save;
      }
    }
    if (!parsed) {
      ch.push_back(with_item());
      while (accept_op(",")) ch.push_back(with_item());
    }
    append(ch, block());
    return make_node(async ? "AsyncWith" : "With", std::move(ch));
  }

  AstNode with_item() {
    std::vector<AstNode> ch;
    ch.push_back(expression());
    if (accept_kw("as")) ch.push_back(star_target());
    return make_node("withitem", std::move(ch));
  }

  AstNode decorated() {
    std::vector<AstNode> decorators;
    while (accept_op("@")) {
      decorators.push_back(named_expression());
      if (!accept(Tok::kNewline)) fail("invalid syntax");
    }
    if (at_kw("def")) return funcdef(std::move(decorators), false);
    if (at_kw("class")) return classdef(std::move(decorators));
    if (at_kw("async") && at_kw("def", 1)) {
      next();
      return funcdef(std::move(decorators), true);
    }
    fail("invalid syntax");
  }

  AstNode funcdef(std::vector<AstNode> decorators, bool async) {
    expect_kw("def");
    std::vector<AstNode> ch;
    ch.push_back(identifier(expect_identifier()));
    expect_op("(");
    ch.push_back(parameters(false));
    expect_op(")");
    std::optional<AstNode> returns;
    if (accept_op("->")) returns = expression();
    append(ch, block());
    append(ch, std::move(decorators));
    push_opt(ch, std::move(returns));
    return make_node(async ? "AsyncFunctionDef" : "FunctionDef", std::move(ch));
  }

  AstNode classdef(std::vector<AstNode> decorators) {
    expect_kw("class");
    std::vector<AstNode> ch;
    ch.push_back(identifier(expect_identifier()));
    if (accept_op("(")) {
      auto [args, keywords] = call_arguments();
      append(ch, std::move(args));
      append(ch, std::move(keywords));
    }
    append(ch, block());
    append(ch, std::move(decorators));
    return make_node("ClassDef", std::move(ch));
  }

  AstNode simple_stmt() {
    DepthGuard guard(*this);
    if (accept_kw("pass")) return make_leaf("Pass");
    if (accept_kw("break")) return make_leaf("Break");
    if (accept_kw("continue")) return make_leaf("Continue");
    if (accept_kw("return")) {
      std::vector<AstNode> ch;
      if (can_start_expression()) ch.push_back(star_expressions());
      return make_node("Return", std::move(ch));
    }
    if (accept_kw("raise")) {
      std::vector<AstNode> ch;
      if (can_start_expression()) {
        ch.push_back(expression());
        if (accept_kw("from")) ch.push_back(expression());
      }
      return make_node("Raise", std::move(ch));
    }
    if (at_kw("global") || at_kw("nonlocal")) {
      const std::string kind = next().text == "global" ? "Global" : "Nonlocal";
      std::vector<AstNode> ch;
      ch.push_back(identifier(expect_identifier()));
      while (accept_op(",")) ch.push_back(identifier(expect_identifier()));
      return make_node(kind, std::move(ch));
    }
    if (accept_kw("del")) {
      std::vector<AstNode> ch;
      do {
        if (!ch.empty() && !can_start_expression()) break;
        AstNode t = primary();
        if (!deletable(t)) fail("cannot delete expression");
        ch.push_back(std::move(t));
      } while (accept_op(","));
      return make_node("Delete", std::move(ch));
    }
    if (accept_kw("assert")) {
      std::vector<AstNode> ch;
      ch.push_back(expression());
      if (accept_op(",")) ch.push_back(expression());
      return make_node("Assert", std::move(ch));
    }
    if (at_kw("import")) return import_name();
    if (at_kw("from")) return import_from();
    return expression_statement();
  }

  AstNode dotted_name() {
    std::string name = expect_identifier();
    while (at_op(".") && at_identifier(1)) {
      next();
      name += "." + next().text;
    }
    return identifier(std::move(name));
  }

  AstNode import_name() {
    expect_kw("import");
    std::vector<AstNode> names;
    do {
      std::vector<AstNode> a;
      a.push_back(dotted_name());
      if (accept_kw("as")) a.push_back(identifier(expect_identifier()));
      names.push_back(make_node("alias", std::move(a)));
    } while (accept_op(","));
    return make_node("Import", std::move(names));
  }

  AstNode import_from() {
    expect_kw("from");
    int level = 0;
    while (at_op(".") || at_op("...")) level += static_cast<int>(next().text.size());
    std::vector<AstNode> ch;
    if (at_identifier()) {
      ch.push_back(dotted_name());
    } else if (level == 0) {
      fail("invalid syntax");
    }
    expect_kw("import");
    auto import_as = [&] {
      std::vector<AstNode> a;
      a.push_back(identifier(expect_identifier()));
      if (accept_kw("as")) a.push_back(identifier(expect_identifier()));
      ch.push_back(make_node("alias", std::move(a)));
    };
    if (accept_op("*")) {
      ch.push_back(make_node("alias", {identifier("*")}));
    } else if (accept_op("(")) {
      import_as();
      while (accept_op(",")) {
        if (at_op(")")) break;
        import_as();
      }
      expect_op(")");
    } else {
      import_as();
      while (accept_op(",")) import_as();
    }
    return make_node("ImportFrom", std::move(ch));
  }

  static std::optional<std::string> aug_op(std::string_view op) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 13> kOps = {{
        {"+=", "Add"}, {"-=", "Sub"}, {"*=", "Mult"}, {"@=", "MatMult"}, {"/=", "Div"}, {"%=", "Mod"},
        {"&=", "BitAnd"}, {"|=", "BitOr"}, {"^=", "BitXor"}, {"<<=", "LShift"}, {">>=", "RShift"},
        {"**=", "Pow"}, {"//=", "FloorDiv"}}};
    for (auto [k, v] : kOps) {
      if (k == op) return std::string(v);
    }
    return std::nullopt;
  }

  AstNode rhs() { return at_kw("yield") ? yield_expr() : star_expressions(); }

  AstNode expression_statement() {
    AstNode first = rhs();
    if (at_op(":")) {
      if (first.type != "Name" && first.type != "Attribute" && first.type != "Subscript") {
        fail("illegal target for annotation");
      }
      next();
      std::vector<AstNode> ch;
      ch.push_back(std::move(first));
      ch.push_back(expression());
      if (accept_op("=")) ch.push_back(rhs());
      return make_node("AnnAssign", std::move(ch));
    }
    if (peek().kind == Tok::kOp) {
      if (auto op = aug_op(peek().text)) {
        if (first.type != "Name" && first.type != "Attribute" && first.type != "Subscript") {
          fail("illegal expression for augmented assignment");
        }
        next();
        std::vector<AstNode> ch;
        ch.push_back(std::move(first));
        ch.push_back(make_leaf(*op));
        ch.push_back(rhs());
        return make_node("AugAssign", std::move(ch));
      }
    }
    if (at_op("=")) {
      std::vector<AstNode> ch;
      if (!assignable(first)) fail("cannot assign to expression");
      ch.push_back(std::move(first));
      while (accept_op("=")) {
        AstNode r = rhs();
        if (at_op("=")) {
          if (!assignable(r)) fail("cannot assign to expression");
        }
        ch.push_back(std::move(r));
      }
      return make_node("Assign", std::move(ch));
    }
    return make_node("Expr", {std::move(first)});
  }

  static bool assignable(const AstNode& n) {
    if (n.type == "Name" || n.type == "Attribute" || n.type == "Subscript") return true;
    if (n.type == "Starred") return assignable(n.children.at(0)) && n.children[0].type != "Starred";
    if (n.type == "Tuple" || n.type == "List") {
      return std::all_of(n.children.begin(), n.children.end(), [](const AstNode& c) { return assignable(c); });
    }
    return false;
  }

  static bool deletable(const AstNode& n) {
    if (n.type == "Name" || n.type == "Attribute" || n.type == "Subscript") return true;
    if (n.type == "Tuple" || n.type == "List") {
      return std::all_of(n.children.begin(), n.children.end(), [](const AstNode& c) { return deletable(c); });
    }
    return false;
  }

  // --- targets -----------------------------------------------------------------

  AstNode star_target() {
    if (accept_op("*")) {
      AstNode inner = star_target();
      if (inner.type == "Starred") fail("invalid starred target");
      return make_node("Starred", {std::move(inner)});
    }
    AstNode t = primary();
    if (!assignable(t)) fail("cannot assign to expression");
    return t;
  }

  AstNode star_targets() {
    AstNode first = star_target();
    if (!at_op(",")) {
      if (first.type == "Starred") fail("starred assignment target must be in a list or tuple");
      return first;
    }
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (!(at_identifier() || at_op("(") || at_op("[") || at_op("*"))) break;
      elts.push_back(star_target());
    }
    return make_node("Tuple", std::move(elts));
  }

  // --- expressions ---------------------------------------------------------------

  // Eval-mode input: comma-separated expressions, no starred items.
  AstNode expressions() {
    AstNode first = expression();
    if (!at_op(",")) return first;
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (!can_start_expression() || at_op("*")) break;
      elts.push_back(expression());
    }
    return make_node("Tuple", std::move(elts));
  }

  AstNode star_expressions() {
    AstNode first = star_expression();
    if (!at_op(",")) return first;
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (!can_start_expression()) break;
      elts.push_back(star_expression());
    }
    return make_node("Tuple", std::move(elts));
  }

  AstNode star_expression() {
    if (accept_op("*")) return make_node("Starred", {bitwise_or()});
    return expression();
  }

  AstNode star_named_expression() {
    if (accept_op("*")) return make_node("Starred", {bitwise_or()});
    return named_expression();
  }

  AstNode named_expression() {
    if (at_identifier() && at_op(":=", 1)) {
      AstNode target = make_leaf("Name", sanitize_value(next().text));
      next();
      return make_node("NamedExpr", {std::move(target), expression()});
    }
    AstNode e = expression();
    if (at_op(":=")) fail("cannot use assignment expressions with this target");
    return e;
  }

  AstNode expression() {
    DepthGuard guard(*this);
    if (at_kw("lambda")) return lambdef();
    AstNode body = disjunction();
    if (!accept_kw("if")) return body;
    AstNode test = disjunction();
    if (!accept_kw("else")) fail("expected 'else' after 'if' expression");
    AstNode orelse = expression();
    return make_node("IfExp", {std::move(test), std::move(body), std::move(orelse)});
  }

  AstNode lambdef() {
    expect_kw("lambda");
    AstNode args = parameters(true);
    expect_op(":");
    return make_node("Lambda", {std::move(args), expression()});
  }

  AstNode parameter(bool lambda) {
    std::vector<AstNode> ch;
    ch.push_back(identifier(expect_identifier()));
    if (!lambda && accept_op(":")) ch.push_back(expression());
    return make_node("arg", std::move(ch));
  }

  // Parameter list up to (not including) ')' or, for lambdas, ':'.
  AstNode parameters(bool lambda) {
    const std::string_view end = lambda ? ":" : ")";
    std::vector<AstNode> posonly, args, kwonly, kw_defaults, defaults;
    std::optional<AstNode> vararg, kwarg;
    bool seen_default = false;
    bool seen_star = false;
    bool seen_slash = false;
    while (!at_op(end)) {
      if (kwarg) fail("arguments cannot follow var-keyword argument");
      if (accept_op("/")) {
        if (seen_slash || seen_star || args.empty()) fail("invalid syntax");
        seen_slash = true;
        for (auto& a : args) posonly.push_back(std::move(a));
        args.clear();
      } else if (accept_op("*")) {
        if (seen_star) fail("* argument may appear only once");
        seen_star = true;
        if (at_identifier()) {
          vararg = parameter(lambda);
        } else if (at_op(end) || !at_op(",")) {
          fail("named arguments must follow bare *");
        }
      } else if (accept_op("**")) {
        kwarg = parameter(lambda);
      } else {
        AstNode a = parameter(lambda);
        if (accept_op("=")) {
          if (seen_star) {
            kw_defaults.push_back(expression());
          } else {
            defaults.push_back(expression());
            seen_default = true;
          }
        } else if (!seen_star && seen_default) {
          fail("non-default argument follows default argument");
        }
        (seen_star ? kwonly : args).push_back(std::move(a));
      }
      if (!accept_op(",")) break;
    }
    if (seen_star && !vararg && kwonly.empty()) fail("named arguments must follow bare *");
    std::vector<AstNode> ch;
    append(ch, std::move(posonly));
    append(ch, std::move(args));
    push_opt(ch, std::move(vararg));
    append(ch, std::move(kwonly));
    append(ch, std::move(kw_defaults));
    push_opt(ch, std::move(kwarg));
    append(ch, std::move(defaults));
    return make_node("arguments", std::move(ch));
  }

  AstNode disjunction() {
    AstNode first = conjunction();
    if (!at_kw("or")) return first;
    std::vector<AstNode> ch{make_leaf("Or"), std::move(first)};
    while (accept_kw("or")) ch.push_back(conjunction());
    return make_node("BoolOp", std::move(ch));
  }

  AstNode conjunction() {
    AstNode first = inversion();
    if (!at_kw("and")) return first;
    std::vector<AstNode> ch{make_leaf("And"), std::move(first)};
    while (accept_kw("and")) ch.push_back(inversion());
    return make_node("BoolOp", std::move(ch));
  }

  AstNode inversion() {
    DepthGuard guard(*this);
    if (accept_kw("not")) return make_node("UnaryOp", {make_leaf("Not"), inversion()});
    return comparison();
  }

  std::optional<std::string> compare_op() {
    const auto& t = peek();
    if (t.kind == Tok::kOp) {
      static constexpr std::array<std::pair<std::string_view, std::string_view>, 6> kOps = {
          {{"==", "Eq"}, {"!=", "NotEq"}, {"<", "Lt"}, {"<=", "LtE"}, {">", "Gt"}, {">=", "GtE"}}};
      for (auto [k, v] : kOps) {
        if (t.text == k) {
          next();
          return std::string(v);
        }
      }
      return std::nullopt;
    }
    if (at_kw("in")) {
      next();
      return "In";
    }
    if (at_kw("not") && at_kw("in", 1)) {
      next();
      next();
      return "NotIn";
    }
    if (at_kw("is")) {
      next();
      return accept_kw("not") ? "IsNot" : "Is";
    }
    return std::nullopt;
  }

  AstNode comparison() {
    AstNode left = bitwise_or();
    std::vector<AstNode> ops, comparators;
    while (auto op = compare_op()) {
      ops.push_back(make_leaf(*op));
      comparators.push_back(bitwise_or());
    }
    if (ops.empty()) return left;
    std::vector<AstNode> ch;
    ch.push_back(std::move(left));
    append(ch, std::move(ops));
    append(ch, std::move(comparators));
    return make_node("Compare", std::move(ch));
  }

  template <typename Next>
  AstNode binary_level(std::initializer_list<std::pair<std::string_view, std::string_view>> ops, Next next_level) {
    AstNode left = (this->*next_level)();
    while (true) {
      std::optional<std::string_view> name;
      for (auto [k, v] : ops) {
        if (at_op(k)) name = v;
      }
      if (!name) return left;
      next();
      AstNode right = (this->*next_level)();
      left = make_node("BinOp", {std::move(left), make_leaf(std::string(*name)), std::move(right)});
    }
  }

  AstNode bitwise_or() { return binary_level({{"|", "BitOr"}}, &Parser::bitwise_xor); }
  AstNode bitwise_xor() { return binary_level({{"^", "BitXor"}}, &Parser::bitwise_and); }
  AstNode bitwise_and() { return binary_level({{"&", "BitAnd"}}, &Parser::shift_expr); }
  AstNode shift_expr() { return binary_level({{"<<", "LShift"}, {">>", "RShift"}}, &Parser::sum); }
  AstNode sum() { return binary_level({{"+", "Add"}, {"-", "Sub"}}, &Parser::term); }
  AstNode term() {
    return binary_level({{"*", "Mult"}, {"/", "Div"}, {"//", "FloorDiv"}, {"%", "Mod"}, {"@", "MatMult"}}, &Parser::factor);
  }

  AstNode factor() {
    DepthGuard guard(*this);
    if (accept_op("+")) return make_node("UnaryOp", {make_leaf("UAdd"), factor()});
    if (accept_op("-")) return make_node("UnaryOp", {make_leaf("USub"), factor()});
    if (accept_op("~")) return make_node("UnaryOp", {make_leaf("Invert"), factor()});
    return power();
  }

  AstNode power() {
    AstNode base = await_primary();
    if (!accept_op("**")) return base;
    return make_node("BinOp", {std::move(base), make_leaf("Pow"), factor()});
  }

  AstNode await_primary() {
    if (accept_kw("await")) return make_node("Await", {primary()});
    return primary();
  }

  AstNode primary() {
    DepthGuard guard(*this);
    AstNode value = atom();
    while (true) {
      if (accept_op(".")) {
        value = make_node("Attribute", {std::move(value), identifier(expect_identifier())});
      } else if (accept_op("(")) {
        auto [args, keywords] = call_arguments();
        std::vector<AstNode> ch;
        ch.push_back(std::move(value));
        append(ch, std::move(args));
        append(ch, std::move(keywords));
        value = make_node("Call", std::move(ch));
      } else if (accept_op("[")) {
        AstNode s = slices();
        expect_op("]");
        value = make_node("Subscript", {std::move(value), std::move(s)});
      } else {
        return value;
      }
    }
  }

  // After '(' of a call or class bases; consumes ')'.
  std::pair<std::vector<AstNode>, std::vector<AstNode>> call_arguments() {
    std::vector<AstNode> args, keywords;
    bool seen_keyword = false;
    bool seen_double_star = false;
    while (!at_op(")")) {
      if (accept_op("*")) {
        if (seen_double_star) fail("iterable argument unpacking follows keyword argument unpacking");
        args.push_back(make_node("Starred", {expression()}));
      } else if (accept_op("**")) {
        keywords.push_back(make_node("keyword", {expression()}));
        seen_double_star = true;
      } else if (at_identifier() && at_op("=", 1)) {
        AstNode name = identifier(next().text);
        next();
        keywords.push_back(make_node("keyword", {std::move(name), expression()}));
        seen_keyword = true;
      } else {
        AstNode e = named_expression();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
          const bool alone = args.empty() && keywords.empty();
          std::vector<AstNode> ch;
          ch.push_back(std::move(e));
          append(ch, comprehension_clauses());
          if (!alone || !at_op(")")) fail("Generator expression must be parenthesized");
          args.push_back(make_node("GeneratorExp", std::move(ch)));
        } else {
          if (at_op("=")) fail("expression cannot contain assignment");
          if (seen_double_star) fail("positional argument follows keyword argument unpacking");
          if (seen_keyword) fail("positional argument follows keyword argument");
          args.push_back(std::move(e));
        }
      }
      if (!accept_op(",")) break;
    }
    expect_op(")");
    return {std::move(args), std::move(keywords)};
  }

  AstNode slice_item() {
    std::vector<AstNode> ch;
    if (!at_op(":")) {
      AstNode e = named_expression();
      if (!at_op(":")) return e;
      ch.push_back(std::move(e));
    }
    expect_op(":");
    if (!at_op(":") && !at_op("]") && !at_op(",")) ch.push_back(expression());
    if (accept_op(":")) {
      if (!at_op("]") && !at_op(",")) ch.push_back(expression());
    }
    return make_node("Slice", std::move(ch));
  }

  AstNode slices() {
    AstNode first = slice_item();
    if (!at_op(",")) return first;
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      elts.push_back(slice_item());
    }
    return make_node("Tuple", std::move(elts));
  }

  std::vector<AstNode> comprehension_clauses() {
    std::vector<AstNode> gens;
    while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      accept_kw("async");
      expect_kw("for");
      std::vector<AstNode> ch;
      ch.push_back(star_targets());
      expect_kw("in");
      ch.push_back(disjunction());
      while (accept_kw("if")) ch.push_back(disjunction());
      gens.push_back(make_node("comprehension", std::move(ch)));
    }
    return gens;
  }

  bool at_comprehension() const { return at_kw("for") || (at_kw("async") && at_kw("for", 1)); }

  AstNode yield_expr() {
    expect_kw("yield");
    if (accept_kw("from")) return make_node("YieldFrom", {expression()});
    std::vector<AstNode> ch;
    if (can_start_expression()) ch.push_back(star_expressions());
    return make_node("Yield", std::move(ch));
  }

  AstNode strings() {
    const Token& first = peek();
    bool any_f = false;
    bool any_bytes = false;
    bool all_bytes = true;
    std::size_t end = first.end;
    while (at(Tok::kString)) {
      const Token& t = next();
      any_f |= t.is_fstring;
      any_bytes |= t.is_bytes;
      all_bytes &= t.is_bytes;
      end = t.end;
    }
    if (any_bytes && !all_bytes) fail("cannot mix bytes and nonbytes literals");
    std::string segment = sanitize_value(src_.substr(first.begin, end - first.begin));
    if (any_f) return make_leaf("JoinedStr", std::move(segment));
    return make_leaf(all_bytes ? "Bytes" : "Str", std::move(segment));
  }

  AstNode atom() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kNumber:
        return make_leaf("Num", sanitize_value(next().text));
      case Tok::kString:
        return strings();
      case Tok::kName:
        if (t.text == "None" || t.text == "True" || t.text == "False") return make_leaf("NameConstant", next().text);
        if (is_keyword(t.text)) fail("invalid syntax");
        return make_leaf("Name", sanitize_value(next().text));
      case Tok::kOp:
        if (accept_op("...")) return make_leaf("Ellipsis");
        if (at_op("(")) return paren_atom();
        if (at_op("[")) return list_atom();
        if (at_op("{")) return brace_atom();
        break;
      default:
        break;
    }
    fail("invalid syntax");
  }

  AstNode paren_atom() {
    expect_op("(");
    if (accept_op(")")) return make_leaf("Tuple");
    if (at_kw("yield")) {
      AstNode y = yield_expr();
      expect_op(")");
      return y;
    }
    AstNode first = star_named_expression();
    if (at_comprehension()) {
      if (first.type == "Starred") fail("iterable unpacking cannot be used in comprehension");
      std::vector<AstNode> ch;
      ch.push_back(std::move(first));
      append(ch, comprehension_clauses());
      expect_op(")");
      return make_node("GeneratorExp", std::move(ch));
    }
    if (at_op(",")) {
      std::vector<AstNode> elts;
      elts.push_back(std::move(first));
      while (accept_op(",")) {
        if (at_op(")")) break;
        elts.push_back(star_named_expression());
      }
      expect_op(")");
      return make_node("Tuple", std::move(elts));
    }
    expect_op(")");
    if (first.type == "Starred") fail("cannot use starred expression here");
    return first;
  }

  AstNode list_atom() {
    expect_op("[");
    if (accept_op("]")) return make_leaf("List");
    AstNode first = star_named_expression();
    if (at_comprehension()) {
      if (first.type == "Starred") fail("iterable unpacking cannot be used in comprehension");
      std::vector<AstNode> ch;
      ch.push_back(std::move(first));
      append(ch, comprehension_clauses());
      expect_op("]");
      return make_node("ListComp", std::move(ch));
    }
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      elts.push_back(star_named_expression());
    }
    expect_op("]");
    return make_node("List", std::move(elts));
  }

  AstNode brace_atom() {
    expect_op("{");
    if (accept_op("}")) return make_leaf("Dict");
    if (at_op("**")) return dict_rest({}, {});
    AstNode first = star_named_expression();
    if (at_op(":") && first.type != "Starred") {
      next();
      AstNode value = expression();
      if (at_comprehension()) {
        std::vector<AstNode> ch;
        ch.push_back(std::move(first));
        ch.push_back(std::move(value));
        append(ch, comprehension_clauses());
        expect_op("}");
        return make_node("DictComp", std::move(ch));
      }
      std::vector<AstNode> keys, values;
      keys.push_back(std::move(first));
      values.push_back(std::move(value));
      if (!accept_op(",")) {
        expect_op("}");
        return dict_node(std::move(keys), std::move(values));
      }
      return dict_rest(std::move(keys), std::move(values));
    }
    if (at_comprehension()) {
      if (first.type == "Starred") fail("iterable unpacking cannot be used in comprehension");
      std::vector<AstNode> ch;
      ch.push_back(std::move(first));
      append(ch, comprehension_clauses());
      expect_op("}");
      return make_node("SetComp", std::move(ch));
    }
    std::vector<AstNode> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("}")) break;
      elts.push_back(star_named_expression());
    }
    expect_op("}");
    return make_node("Set", std::move(elts));
  }

  // Remaining `key: value` / `**mapping` items; consumes '}'.
  AstNode dict_rest(std::vector<AstNode> keys, std::vector<AstNode> values) {
    while (!at_op("}")) {
      if (accept_op("**")) {
        values.push_back(bitwise_or());
      } else {
        keys.push_back(expression());
        expect_op(":");
        values.push_back(expression());
      }
      if (!accept_op(",")) break;
    }
    expect_op("}");
    return dict_node(std::move(keys), std::move(values));
  }

  static AstNode dict_node(std::vector<AstNode> keys, std::vector<AstNode> values) {
    std::vector<AstNode> ch;
    append(ch, std::move(keys));
    append(ch, std::move(values));
    return make_node("Dict", std::move(ch));
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
  int depth_ = 0;
};

// Expression mode first, then statement mode; nullopt if both fail.
inline std::optional<AstNode> parse_python(std::string_view code) {
  std::vector<Token> tokens;
  try {
    tokens = tokenize(code);
  } catch (const SyntaxError&) {
    return std::nullopt;
  }
  try {
    return Parser(code, tokens).parse_expression();
  } catch (const SyntaxError&) {
  }
  try {
    return Parser(code, std::move(tokens)).parse_module();
  } catch (const SyntaxError&) {
    return std::nullopt;
  }
}

class EmbeddedBackend : public ParserBackend {
 public:
  std::optional<AstNode> parse(int, std::string_view code) const override { return parse_python(code); }
};

}  // namespace codematch::ast::python
