#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>

#include "rieszfield/error.hpp"

namespace rieszfield {

/**
 * Tiny arithmetic language over the coordinates x and y:
 *
 *     expr   := term (('+' | '-') term)*
 *     term   := unary (('*' | '/') unary)*
 *     unary  := ('+' | '-') unary | primary
 *     primary:= number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
 *     func   := atan | sin | cos | exp
 *
 * Parsing produces a tree evaluated by `operator()`.
 */
class Expression {
public:
  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    auto root = p.expr();
    p.skip_space();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    Expression e;
    e.root_ = std::move(root);
    e.text_ = std::string(text);
    return e;
  }

  double operator()(double x, double y) const { return root_->eval(x, y); }

  const std::string& text() const noexcept { return text_; }

private:
  struct Node {
    enum class Kind { Number, X, Y, Add, Sub, Mul, Div, Neg, Atan, Sin, Cos, Exp };
    Kind kind = Kind::Number;
    double value = 0.0;
    std::shared_ptr<const Node> a, b;

    double eval(double x, double y) const {
      switch (kind) {
        case Kind::Number: return value;
        case Kind::X: return x;
        case Kind::Y: return y;
        case Kind::Add: return a->eval(x, y) + b->eval(x, y);
        case Kind::Sub: return a->eval(x, y) - b->eval(x, y);
        case Kind::Mul: return a->eval(x, y) * b->eval(x, y);
        case Kind::Div: return a->eval(x, y) / b->eval(x, y);
        case Kind::Neg: return -a->eval(x, y);
        case Kind::Atan: return std::atan(a->eval(x, y));
        case Kind::Sin: return std::sin(a->eval(x, y));
        case Kind::Cos: return std::cos(a->eval(x, y));
        case Kind::Exp: return std::exp(a->eval(x, y));
      }
      return 0.0;
    }
  };
  using NodePtr = std::shared_ptr<const Node>;

  static NodePtr make(Node::Kind kind, NodePtr a = nullptr, NodePtr b = nullptr, double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    n->value = value;
    return n;
  }

  struct Parser {
    std::string_view s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw ValidationError("expression error at column " + std::to_string(pos + 1) + ": " + what);
    }

    void skip_space() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool accept(char c) {
      skip_space();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    NodePtr expr() {
      NodePtr left = term();
      for (;;) {
        if (accept('+')) left = make(Node::Kind::Add, left, term());
        else if (accept('-')) left = make(Node::Kind::Sub, left, term());
        else return left;
      }
    }

    NodePtr term() {
      NodePtr left = unary();
      for (;;) {
        if (accept('*')) left = make(Node::Kind::Mul, left, unary());
        else if (accept('/')) left = make(Node::Kind::Div, left, unary());
        else return left;
      }
    }

    NodePtr unary() {
      if (accept('-')) return make(Node::Kind::Neg, unary());
      if (accept('+')) return unary();
      return primary();
    }

    NodePtr primary() {
      skip_space();
      if (pos >= s.size()) fail("unexpected end of input");
      if (accept('(')) {
        NodePtr inner = expr();
        if (!accept(')')) fail("expected ')'");
        return inner;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const std::string rest(s.substr(pos));
        char* end = nullptr;
        const double v = std::strtod(rest.c_str(), &end);
        if (end == rest.c_str()) fail("malformed number");
        pos += static_cast<std::size_t>(end - rest.c_str());
        return make(Node::Kind::Number, nullptr, nullptr, v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string_view name = s.substr(start, pos - start);
        if (name == "x") return make(Node::Kind::X);
        if (name == "y") return make(Node::Kind::Y);
        if (name == "pi") return make(Node::Kind::Number, nullptr, nullptr, 3.14159265358979323846);
        Node::Kind kind;
        if (name == "atan") kind = Node::Kind::Atan;
        else if (name == "sin") kind = Node::Kind::Sin;
        else if (name == "cos") kind = Node::Kind::Cos;
        else if (name == "exp") kind = Node::Kind::Exp;
        else {
          pos = start;
          fail("unknown identifier '" + std::string(name) + "'");
        }
        if (!accept('(')) fail("expected '(' after " + std::string(name));
        NodePtr arg = expr();
        if (!accept(')')) fail("expected ')'");
        return make(kind, arg);
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  NodePtr root_;
  std::string text_;
};

}  // namespace rieszfield
