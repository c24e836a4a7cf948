#pragma once

// Arithmetic expressions in one variable x:
//   + - * / ^, unary minus, parentheses, numbers, pi, and
//   exp log sqrt abs sin cos.
// Evaluation carries a derivative alongside the value (forward mode).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "steininfo/errors.hpp"

namespace steininfo {

struct Dual {
  double v = 0.0;
  double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }

inline Dual pow(Dual a, Dual b) {
  if (b.d == 0.0) {
    const double v = std::pow(a.v, b.v);
    const double d = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0) * a.d;
    return {v, d};
  }
  const double v = std::pow(a.v, b.v);
  return {v, v * (b.d * std::log(a.v) + b.v * a.d / a.v)};
}

class Expression {
 public:
  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = text;
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    return e;
  }

  double operator()(double x) const { return root_->eval({x, 1.0}).v; }
  Dual eval(double x) const { return root_->eval({x, 1.0}); }
  double derivative(double x) const { return eval(x).d; }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    enum class Op { num, var, add, sub, mul, div, pow, neg, fn } op = Op::num;
    double value = 0.0;
    std::string fn;
    std::shared_ptr<Node> l, r;

    Dual eval(Dual x) const {
      switch (op) {
        case Op::num: return {value, 0.0};
        case Op::var: return x;
        case Op::add: return l->eval(x) + r->eval(x);
        case Op::sub: return l->eval(x) - r->eval(x);
        case Op::mul: return l->eval(x) * r->eval(x);
        case Op::div: return l->eval(x) / r->eval(x);
        case Op::pow: return steininfo::pow(l->eval(x), r->eval(x));
        case Op::neg: return -l->eval(x);
        case Op::fn: return apply(l->eval(x));
      }
      return {};
    }

    Dual apply(Dual a) const {
      if (fn == "exp") {
        const double e = std::exp(a.v);
        return {e, e * a.d};
      }
      if (fn == "log") return {std::log(a.v), a.d / a.v};
      if (fn == "sqrt") {
        const double s = std::sqrt(a.v);
        return {s, 0.5 * a.d / s};
      }
      if (fn == "abs") return {std::abs(a.v), a.v < 0 ? -a.d : a.d};
      if (fn == "sin") return {std::sin(a.v), std::cos(a.v) * a.d};
      return {std::cos(a.v), -std::sin(a.v) * a.d};  // cos
    }
  };
  using NodePtr = std::shared_ptr<Node>;

  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw ParseError("expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + what, 0);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    static NodePtr bin(Node::Op op, NodePtr a, NodePtr b) {
      auto n = std::make_shared<Node>();
      n->op = op;
      n->l = std::move(a);
      n->r = std::move(b);
      return n;
    }

    NodePtr expr() {
      NodePtr n = term();
      for (;;) {
        if (eat('+')) n = bin(Node::Op::add, n, term());
        else if (eat('-')) n = bin(Node::Op::sub, n, term());
        else return n;
      }
    }
    NodePtr term() {
      NodePtr n = unary();
      for (;;) {
        if (eat('*')) n = bin(Node::Op::mul, n, unary());
        else if (eat('/')) n = bin(Node::Op::div, n, unary());
        else return n;
      }
    }
    NodePtr unary() {
      if (eat('-')) return bin(Node::Op::neg, unary(), nullptr);
      if (eat('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (eat('^')) return bin(Node::Op::pow, base, unary());  // right associative
      return base;
    }
    NodePtr primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      if (eat('(')) {
        NodePtr n = expr();
        if (!eat(')')) fail("expected ')'");
        return n;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<Node>();
        n->value = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string name = s.substr(start, pos - start);
        auto n = std::make_shared<Node>();
        if (name == "x") {
          n->op = Node::Op::var;
          return n;
        }
        if (name == "pi") {
          n->value = std::numbers::pi;
          return n;
        }
        if (name == "exp" || name == "log" || name == "sqrt" || name == "abs" || name == "sin" || name == "cos") {
          if (!eat('(')) fail("expected '(' after " + name);
          n->op = Node::Op::fn;
          n->fn = name;
          n->l = expr();
          if (!eat(')')) fail("expected ')'");
          return n;
        }
        pos = start;
        fail("unknown identifier '" + name + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  std::string text_;
  NodePtr root_;
};

}  // namespace steininfo
