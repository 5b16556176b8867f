#ifndef STABENT_EXPR_HPP
#define STABENT_EXPR_HPP

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>

#include "stabent/error.hpp"

namespace stabent {

enum class NodeKind { kConstant, kState, kNoise, kAdd, kSub, kMul, kDiv, kPow, kNeg };

struct ExprNode;

/// Immutable expression tree over state variables x1..xN and noise
/// variables w1..wK. Indices are stored 0-based. Copies share structure.
class Expr {
 public:
  Expr() = default;

  static Expr constant(double value, SourceLocation loc = {});
  static Expr state(std::size_t index, SourceLocation loc = {});
  static Expr noise(std::size_t index, SourceLocation loc = {});
  static Expr binary(NodeKind kind, Expr lhs, Expr rhs, SourceLocation loc = {});
  static Expr power(Expr base, int exponent, SourceLocation loc = {});
  static Expr negate(Expr operand, SourceLocation loc = {});

  NodeKind kind() const;
  double value() const;
  std::size_t index() const;
  int exponent() const;
  const Expr& lhs() const;
  const Expr& rhs() const;
  SourceLocation location() const;

  bool is_constant(double v) const {
    return kind() == NodeKind::kConstant && value() == v;
  }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  NodeKind kind = NodeKind::kConstant;
  double value = 0.0;
  std::size_t index = 0;
  int exponent = 0;
  SourceLocation loc;
  Expr lhs;
  Expr rhs;
};

inline Expr Expr::constant(double value, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(ExprNode{NodeKind::kConstant, value, 0, 0, loc, {}, {}});
  return Expr(std::move(n));
}

inline Expr Expr::state(std::size_t index, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(ExprNode{NodeKind::kState, 0.0, index, 0, loc, {}, {}});
  return Expr(std::move(n));
}

inline Expr Expr::noise(std::size_t index, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(ExprNode{NodeKind::kNoise, 0.0, index, 0, loc, {}, {}});
  return Expr(std::move(n));
}

inline Expr Expr::binary(NodeKind kind, Expr lhs, Expr rhs, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(
      ExprNode{kind, 0.0, 0, 0, loc, std::move(lhs), std::move(rhs)});
  return Expr(std::move(n));
}

inline Expr Expr::power(Expr base, int exponent, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(
      ExprNode{NodeKind::kPow, 0.0, 0, exponent, loc, std::move(base), {}});
  return Expr(std::move(n));
}

inline Expr Expr::negate(Expr operand, SourceLocation loc) {
  auto n = std::make_shared<ExprNode>(
      ExprNode{NodeKind::kNeg, 0.0, 0, 0, loc, std::move(operand), {}});
  return Expr(std::move(n));
}

inline NodeKind Expr::kind() const { return node_->kind; }
inline double Expr::value() const { return node_->value; }
inline std::size_t Expr::index() const { return node_->index; }
inline int Expr::exponent() const { return node_->exponent; }
inline const Expr& Expr::lhs() const { return node_->lhs; }
inline const Expr& Expr::rhs() const { return node_->rhs; }
inline SourceLocation Expr::location() const { return node_->loc; }

// Structural equality; source locations are ignored.
inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case NodeKind::kConstant:
      return a.value() == b.value();
    case NodeKind::kState:
    case NodeKind::kNoise:
      return a.index() == b.index();
    case NodeKind::kPow:
      return a.exponent() == b.exponent() && a.lhs() == b.lhs();
    case NodeKind::kNeg:
      return a.lhs() == b.lhs();
    default:
      return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline double int_power(double base, int exponent, SourceLocation loc) {
  unsigned n = exponent < 0 ? static_cast<unsigned>(-(long long)exponent)
                            : static_cast<unsigned>(exponent);
  double result = 1.0;
  double b = base;
  while (n != 0) {
    if (n & 1u) result *= b;
    b *= b;
    n >>= 1u;
  }
  if (exponent < 0) {
    if (result == 0.0) throw EvaluationError("division by zero in negative power", loc);
    result = 1.0 / result;
  }
  return result;
}

}  // namespace detail

/// Evaluates `e` at state `x` and noise `w`.
inline double evaluate(const Expr& e, std::span<const double> x, std::span<const double> w) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      return e.value();
    case NodeKind::kState:
      if (e.index() >= x.size()) {
        throw DimensionError("state variable x" + std::to_string(e.index() + 1) +
                             " out of range for state dimension " + std::to_string(x.size()));
      }
      return x[e.index()];
    case NodeKind::kNoise:
      if (e.index() >= w.size()) {
        throw DimensionError("noise variable w" + std::to_string(e.index() + 1) +
                             " out of range for noise dimension " + std::to_string(w.size()));
      }
      return w[e.index()];
    case NodeKind::kAdd:
      return evaluate(e.lhs(), x, w) + evaluate(e.rhs(), x, w);
    case NodeKind::kSub:
      return evaluate(e.lhs(), x, w) - evaluate(e.rhs(), x, w);
    case NodeKind::kMul:
      return evaluate(e.lhs(), x, w) * evaluate(e.rhs(), x, w);
    case NodeKind::kDiv: {
      const double num = evaluate(e.lhs(), x, w);
      const double den = evaluate(e.rhs(), x, w);
      if (den == 0.0) throw EvaluationError("division by zero", e.location());
      return num / den;
    }
    case NodeKind::kPow:
      return detail::int_power(evaluate(e.lhs(), x, w), e.exponent(), e.location());
    case NodeKind::kNeg:
      return -evaluate(e.lhs(), x, w);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Symbolic differentiation with constant folding of 0/1 identities.

namespace detail {

inline Expr fold_add(Expr a, Expr b, SourceLocation loc) {
  if (a.kind() == NodeKind::kConstant && b.kind() == NodeKind::kConstant)
    return Expr::constant(a.value() + b.value(), loc);
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::binary(NodeKind::kAdd, std::move(a), std::move(b), loc);
}

inline Expr fold_neg(Expr a, SourceLocation loc) {
  if (a.kind() == NodeKind::kConstant) return Expr::constant(-a.value(), loc);
  if (a.kind() == NodeKind::kNeg) return a.lhs();
  return Expr::negate(std::move(a), loc);
}

inline Expr fold_sub(Expr a, Expr b, SourceLocation loc) {
  if (a.kind() == NodeKind::kConstant && b.kind() == NodeKind::kConstant)
    return Expr::constant(a.value() - b.value(), loc);
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return fold_neg(std::move(b), loc);
  return Expr::binary(NodeKind::kSub, std::move(a), std::move(b), loc);
}

inline Expr fold_mul(Expr a, Expr b, SourceLocation loc) {
  if (a.kind() == NodeKind::kConstant && b.kind() == NodeKind::kConstant)
    return Expr::constant(a.value() * b.value(), loc);
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0, loc);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return fold_neg(std::move(b), loc);
  if (b.is_constant(-1.0)) return fold_neg(std::move(a), loc);
  return Expr::binary(NodeKind::kMul, std::move(a), std::move(b), loc);
}

inline Expr fold_div(Expr a, Expr b, SourceLocation loc) {
  if (a.is_constant(0.0)) return Expr::constant(0.0, loc);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(NodeKind::kDiv, std::move(a), std::move(b), loc);
}

inline Expr fold_pow(Expr base, int exponent, SourceLocation loc) {
  if (exponent == 0) return Expr::constant(1.0, loc);
  if (exponent == 1) return base;
  return Expr::power(std::move(base), exponent, loc);
}

}  // namespace detail

/// Partial derivative of `e` with respect to state variable `wrt` (0-based).
inline Expr differentiate(const Expr& e, std::size_t wrt) {
  using namespace detail;
  const SourceLocation loc = e.location();
  switch (e.kind()) {
    case NodeKind::kConstant:
    case NodeKind::kNoise:
      return Expr::constant(0.0, loc);
    case NodeKind::kState:
      return Expr::constant(e.index() == wrt ? 1.0 : 0.0, loc);
    case NodeKind::kAdd:
      return fold_add(differentiate(e.lhs(), wrt), differentiate(e.rhs(), wrt), loc);
    case NodeKind::kSub:
      return fold_sub(differentiate(e.lhs(), wrt), differentiate(e.rhs(), wrt), loc);
    case NodeKind::kMul: {
      Expr left = fold_mul(differentiate(e.lhs(), wrt), e.rhs(), loc);
      Expr right = fold_mul(e.lhs(), differentiate(e.rhs(), wrt), loc);
      return fold_add(std::move(left), std::move(right), loc);
    }
    case NodeKind::kDiv: {
      Expr num = fold_sub(fold_mul(differentiate(e.lhs(), wrt), e.rhs(), loc),
                          fold_mul(e.lhs(), differentiate(e.rhs(), wrt), loc), loc);
      return fold_div(std::move(num), fold_pow(e.rhs(), 2, loc), loc);
    }
    case NodeKind::kPow: {
      const int n = e.exponent();
      if (n == 0) return Expr::constant(0.0, loc);
      Expr outer = fold_mul(Expr::constant(static_cast<double>(n), loc),
                            fold_pow(e.lhs(), n - 1, loc), loc);
      return fold_mul(std::move(outer), differentiate(e.lhs(), wrt), loc);
    }
    case NodeKind::kNeg:
      return fold_neg(differentiate(e.lhs(), wrt), loc);
  }
  return Expr::constant(0.0, loc);
}

/// True when the expression mentions no state or noise variable.
inline bool is_constant_expr(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      return true;
    case NodeKind::kState:
    case NodeKind::kNoise:
      return false;
    case NodeKind::kPow:
    case NodeKind::kNeg:
      return is_constant_expr(e.lhs());
    default:
      return is_constant_expr(e.lhs()) && is_constant_expr(e.rhs());
  }
}

// ---------------------------------------------------------------------------
// Canonical printer. Constants use the shortest round-trip decimal form and
// every same-precedence right operand is parenthesized, so printing and
// reparsing reproduces the tree exactly.

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::kAdd:
    case NodeKind::kSub:
      return 1;
    case NodeKind::kMul:
    case NodeKind::kDiv:
      return 2;
    case NodeKind::kNeg:
      return 3;
    case NodeKind::kPow:
      return 4;
    case NodeKind::kConstant:
      return std::signbit(e.value()) ? 3 : 5;
    default:
      return 5;
  }
}

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void print_into(const Expr& e, std::string& out);

inline void print_operand(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print_into(e, out);
    out += ')';
  } else {
    print_into(e, out);
  }
}

inline void print_into(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      out += format_number(e.value());
      return;
    case NodeKind::kState:
      out += 'x';
      out += std::to_string(e.index() + 1);
      return;
    case NodeKind::kNoise:
      out += 'w';
      out += std::to_string(e.index() + 1);
      return;
    case NodeKind::kAdd:
    case NodeKind::kSub:
    case NodeKind::kMul:
    case NodeKind::kDiv: {
      const int p = precedence(e);
      print_operand(e.lhs(), p, out);
      switch (e.kind()) {
        case NodeKind::kAdd: out += " + "; break;
        case NodeKind::kSub: out += " - "; break;
        case NodeKind::kMul: out += " * "; break;
        default: out += " / "; break;
      }
      print_operand(e.rhs(), p + 1, out);
      return;
    }
    case NodeKind::kPow:
      print_operand(e.lhs(), 5, out);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    case NodeKind::kNeg:
      out += '-';
      // "--a" would lex fine but "-(-a)" reads better; "-(-1)" keeps a
      // negative literal distinct from a negated one.
      print_operand(e.lhs(), precedence(e.lhs()) == 3 ? 4 : 3, out);
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_into(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parser.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' exponent)?
//   exponent := ['-'] INTEGER | '(' ['-'] INTEGER ')'
//   primary  := NUMBER | 'x'INDEX | 'w'INDEX | '(' expr ')'

struct ExprDims {
  std::size_t state = 0;
  std::size_t noise = 0;
};

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, ExprDims dims, SourceLocation origin)
      : text_(text), dims_(dims), line_(origin.line == 0 ? 1 : origin.line),
        col_(origin.column == 0 ? 1 : origin.column) {}

  Expr parse_all() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, here()); }

  SourceLocation here() const { return {line_, col_}; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r' || text_[pos_] == '\n'))
      advance();
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      const SourceLocation loc = here();
      advance();
      Expr rhs = parse_term();
      lhs = Expr::binary(c == '+' ? NodeKind::kAdd : NodeKind::kSub, std::move(lhs),
                         std::move(rhs), loc);
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      const SourceLocation loc = here();
      advance();
      Expr rhs = parse_unary();
      lhs = Expr::binary(c == '*' ? NodeKind::kMul : NodeKind::kDiv, std::move(lhs),
                         std::move(rhs), loc);
    }
  }

  Expr parse_unary() {
    if (peek() == '-') {
      const SourceLocation loc = here();
      advance();
      return Expr::negate(parse_unary(), loc);
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (peek() != '^') return base;
    const SourceLocation loc = here();
    advance();
    int exponent = 0;
    if (accept('(')) {
      exponent = parse_integer();
      if (!accept(')')) fail("expected ')' after exponent");
    } else {
      exponent = parse_integer();
    }
    if (peek() == '^') fail("chained powers need parentheses");
    return Expr::power(std::move(base), exponent, loc);
  }

  int parse_integer() {
    const bool negative = accept('-');
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
    if (pos_ == start) fail("exponent must be an integer literal");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      fail("exponent must be an integer literal");
    int value = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc()) fail("exponent out of range");
    return negative ? -value : value;
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '(') {
      advance();
      Expr inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_variable();
    if (c == '\0') fail("unexpected end of expression");
    fail(std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    const SourceLocation loc = here();
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      advance();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) advance();
      const std::size_t exp_start = pos_;
      digits();
      if (pos_ == exp_start) fail("malformed number exponent");
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      throw ParseError("malformed number '" + std::string(text_.substr(start, pos_ - start)) + "'", loc);
    }
    return Expr::constant(value, loc);
  }

  Expr parse_variable() {
    const SourceLocation loc = here();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      advance();
    const std::string_view name = text_.substr(start, pos_ - start);
    const char head = name.front();
    const std::string_view tail = name.substr(1);
    bool numeric_tail = !tail.empty() && tail.front() != '0';
    for (char d : tail) numeric_tail = numeric_tail && std::isdigit(static_cast<unsigned char>(d));
    if ((head != 'x' && head != 'w') || !numeric_tail) {
      throw ParseError("unknown variable '" + std::string(name) + "'", loc);
    }
    std::size_t index = 0;
    auto res = std::from_chars(tail.data(), tail.data() + tail.size(), index);
    if (res.ec != std::errc()) throw ParseError("variable index out of range", loc);
    const std::size_t limit = head == 'x' ? dims_.state : dims_.noise;
    if (index > limit) {
      throw ParseError("unknown variable '" + std::string(name) + "' (" +
                           (head == 'x' ? "state" : "noise") + " dimension is " +
                           std::to_string(limit) + ")",
                       loc);
    }
    return head == 'x' ? Expr::state(index - 1, loc) : Expr::noise(index - 1, loc);
  }

  std::string_view text_;
  ExprDims dims_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t col_;
};

}  // namespace detail

/// Parses one expression. Variables must satisfy 1 <= i <= dims.
inline Expr parse_expression(std::string_view text, ExprDims dims,
                             SourceLocation origin = {1, 1}) {
  return detail::ExprParser(text, dims, origin).parse_all();
}

}  // namespace stabent

#endif  // STABENT_EXPR_HPP
