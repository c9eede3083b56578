#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "temdp/mdp.hpp"

namespace temdp {

/// Syntax error with the 0-based offset into the formula string.
struct ParseError : Error {
  std::size_t position;
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " at position " + std::to_string(pos)), position(pos) {}
};

enum class LtlOp {
  True,
  False,
  Atom,
  NotAtom,
  And,
  Or,
  Next,
  Eventually,
  Until,
};

struct LtlNode {
  LtlOp op;
  std::string atom;   // Atom / NotAtom only
  int left = -1;      // unary operand or left child
  int right = -1;
};

/// Co-safe LTL formula in positive normal form, stored as a node arena.
struct LtlFormula {
  std::vector<LtlNode> nodes;
  int root = -1;

  const LtlNode& at(int i) const { return nodes[i]; }

  /// Atom names in first-occurrence order.
  std::vector<std::string> atoms() const {
    std::vector<std::string> out;
    for (const auto& n : nodes) {
      if (n.op != LtlOp::Atom && n.op != LtlOp::NotAtom) continue;
      bool seen = false;
      for (const auto& a : out) seen = seen || a == n.atom;
      if (!seen) out.push_back(n.atom);
    }
    return out;
  }

  std::string to_string(int i = -1) const {
    if (i < 0) i = root;
    const LtlNode& n = nodes[i];
    switch (n.op) {
      case LtlOp::True: return "true";
      case LtlOp::False: return "false";
      case LtlOp::Atom: return n.atom;
      case LtlOp::NotAtom: return "!" + n.atom;
      case LtlOp::And:
        return "(" + to_string(n.left) + " & " + to_string(n.right) + ")";
      case LtlOp::Or:
        return "(" + to_string(n.left) + " | " + to_string(n.right) + ")";
      case LtlOp::Next: return "X " + to_string(n.left);
      case LtlOp::Eventually: return "F " + to_string(n.left);
      case LtlOp::Until:
        return "(" + to_string(n.left) + " U " + to_string(n.right) + ")";
    }
    return "?";
  }
};

namespace detail {

// Recursive-descent parser. Precedence: ! > X,F > U (right-assoc) > & > |.
class LtlParser {
 public:
  explicit LtlParser(const std::string& text) : text_(text) {}

  LtlFormula parse() {
    LtlFormula f;
    f.root = parse_or(f);
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError("unexpected trailing input", pos_);
    return f;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  int add(LtlFormula& f, LtlNode n) {
    f.nodes.push_back(std::move(n));
    return static_cast<int>(f.nodes.size()) - 1;
  }

  int parse_or(LtlFormula& f) {
    int lhs = parse_and(f);
    while (eat('|')) {
      int rhs = parse_and(f);
      lhs = add(f, {LtlOp::Or, "", lhs, rhs});
    }
    return lhs;
  }

  int parse_and(LtlFormula& f) {
    int lhs = parse_until(f);
    while (eat('&')) {
      int rhs = parse_until(f);
      lhs = add(f, {LtlOp::And, "", lhs, rhs});
    }
    return lhs;
  }

  int parse_until(LtlFormula& f) {
    int lhs = parse_unary(f);
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == 'U' && !is_ident_char(pos_ + 1)) {
      ++pos_;
      int rhs = parse_until(f);  // right-associative
      return add(f, {LtlOp::Until, "", lhs, rhs});
    }
    return lhs;
  }

  int parse_unary(LtlFormula& f) {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) throw ParseError("unexpected end of formula", pos_);
    const char c = text_[pos_];
    if (c == '!') {
      ++pos_;
      skip_ws();
      const std::size_t operand_pos = pos_;
      if (pos_ < text_.size() &&
          std::islower(static_cast<unsigned char>(text_[pos_]))) {
        std::string name = parse_ident();
        if (name == "true" || name == "false")
          throw ParseError("negation not on atom", operand_pos);
        return add(f, {LtlOp::NotAtom, name});
      }
      throw ParseError("negation not on atom", operand_pos);
    }
    if (c == 'X' && !is_ident_char(pos_ + 1)) {
      ++pos_;
      int sub = parse_unary(f);
      return add(f, {LtlOp::Next, "", sub});
    }
    if (c == 'F' && !is_ident_char(pos_ + 1)) {
      ++pos_;
      int sub = parse_unary(f);
      return add(f, {LtlOp::Eventually, "", sub});
    }
    if (c == 'G' || c == 'R' || (c == '[' && pos_ + 1 < text_.size() &&
                                 text_[pos_ + 1] == ']'))
      throw ParseError("unsupported operator (only X, F, U are co-safe)", pos_);
    if (c == '(') {
      ++pos_;
      int sub = parse_or(f);
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return sub;
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      std::string name = parse_ident();
      if (name == "true") return add(f, {LtlOp::True});
      if (name == "false") return add(f, {LtlOp::False});
      return add(f, {LtlOp::Atom, std::move(name)});
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", start);
  }

  bool is_ident_char(std::size_t i) const {
    if (i >= text_.size()) return false;
    const char c = text_[i];
    return std::islower(static_cast<unsigned char>(c)) ||
           std::isdigit(static_cast<unsigned char>(c)) || c == '_';
  }

  std::string parse_ident() {
    std::size_t begin = pos_;
    while (is_ident_char(pos_)) ++pos_;
    return text_.substr(begin, pos_ - begin);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the concrete syntax: `!` (atoms only), `&`, `|`, `X`, `F`, `U`,
/// identifiers [a-z][a-z0-9_]*, literals true/false, parentheses.
inline LtlFormula parse_ltl(const std::string& text) {
  return detail::LtlParser(text).parse();
}

}  // namespace temdp
