#pragma once

// Small arithmetic-expression compiler for user-supplied densities of one
// variable `z`. Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := ('-'|'+') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | 'z' | 'pi' | 'e' | ident '(' expr ')' | '(' expr ')'

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "cwsoc/errors.hpp"

namespace cwsoc {

class Expression {
 public:
  explicit Expression(std::string source) : source_(std::move(source)) {
    Parser p{source_, 0, nodes_};
    root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != source_.size())
      throw validation_error("expression: unexpected '" + std::string(1, source_[p.pos]) + "' at column " +
                             std::to_string(p.pos + 1));
  }

  double operator()(double z) const { return eval(root_, z); }
  const std::string& source() const noexcept { return source_; }

 private:
  enum class Op { num, var, add, sub, mul, div, pow, neg, fn };
  enum class Fn { exp, log, sqrt, abs, sin, cos, tan, sinh, cosh, tanh };

  struct Node {
    Op op;
    double value = 0.0;
    int lhs = -1;
    int rhs = -1;
    Fn fn = Fn::exp;
  };

  struct Parser {
    std::string_view s;
    std::size_t pos;
    std::vector<Node>& nodes;

    int push(Node n) {
      nodes.push_back(n);
      return static_cast<int>(nodes.size()) - 1;
    }
    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
      throw validation_error("expression: " + what + " at column " + std::to_string(pos + 1));
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (accept('+')) lhs = push({Op::add, 0.0, lhs, parse_term()});
        else if (accept('-')) lhs = push({Op::sub, 0.0, lhs, parse_term()});
        else return lhs;
      }
    }
    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        if (accept('*')) lhs = push({Op::mul, 0.0, lhs, parse_unary()});
        else if (accept('/')) lhs = push({Op::div, 0.0, lhs, parse_unary()});
        else return lhs;
      }
    }
    int parse_unary() {
      if (accept('-')) return push({Op::neg, 0.0, parse_unary()});
      if (accept('+')) return parse_unary();
      return parse_power();
    }
    int parse_power() {
      int base = parse_atom();
      if (accept('^')) return push({Op::pow, 0.0, base, parse_unary()});
      return base;
    }
    int parse_atom() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end");
      if (accept('(')) {
        int inner = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return inner;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const std::string tail(s.substr(pos));
        char* end = nullptr;
        const double v = std::strtod(tail.c_str(), &end);
        if (end == tail.c_str()) fail("bad number");
        pos += static_cast<std::size_t>(end - tail.c_str());
        return push({Op::num, v});
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string_view id = s.substr(start, pos - start);
        if (id == "z") return push({Op::var});
        if (id == "pi") return push({Op::num, std::numbers::pi});
        if (id == "e") return push({Op::num, std::numbers::e});
        static constexpr std::pair<std::string_view, Fn> table[] = {
            {"exp", Fn::exp},   {"log", Fn::log},   {"sqrt", Fn::sqrt}, {"abs", Fn::abs},   {"sin", Fn::sin},
            {"cos", Fn::cos},   {"tan", Fn::tan},   {"sinh", Fn::sinh}, {"cosh", Fn::cosh}, {"tanh", Fn::tanh}};
        for (const auto& [name, fn] : table) {
          if (id != name) continue;
          if (!accept('(')) fail("expected '(' after " + std::string(name));
          int arg = parse_expr();
          if (!accept(')')) fail("expected ')'");
          Node n{Op::fn, 0.0, arg};
          n.fn = fn;
          return push(n);
        }
        pos = start;
        fail("unknown identifier '" + std::string(id) + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  double eval(int idx, double z) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.op) {
      case Op::num: return n.value;
      case Op::var: return z;
      case Op::add: return eval(n.lhs, z) + eval(n.rhs, z);
      case Op::sub: return eval(n.lhs, z) - eval(n.rhs, z);
      case Op::mul: return eval(n.lhs, z) * eval(n.rhs, z);
      case Op::div: return eval(n.lhs, z) / eval(n.rhs, z);
      case Op::pow: return std::pow(eval(n.lhs, z), eval(n.rhs, z));
      case Op::neg: return -eval(n.lhs, z);
      case Op::fn: {
        const double a = eval(n.lhs, z);
        switch (n.fn) {
          case Fn::exp: return std::exp(a);
          case Fn::log: return std::log(a);
          case Fn::sqrt: return std::sqrt(a);
          case Fn::abs: return std::abs(a);
          case Fn::sin: return std::sin(a);
          case Fn::cos: return std::cos(a);
          case Fn::tan: return std::tan(a);
          case Fn::sinh: return std::sinh(a);
          case Fn::cosh: return std::cosh(a);
          case Fn::tanh: return std::tanh(a);
        }
      }
    }
    return 0.0;
  }

  std::string source_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace cwsoc
