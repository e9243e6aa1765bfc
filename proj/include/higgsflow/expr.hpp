#pragma once
// Small complex-valued expression grammar for configuration files: decimal
// literals, the constants i and pi, the physical lattice coordinates x0..x3,
// the four arithmetic operators with the usual precedence, unary minus,
// parentheses, and the functions sin, cos, exp.  Expressions are parsed once
// into a tree and evaluated per lattice site in physical coordinates
// (site index times period over N).

#include <cctype>
#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "higgsflow/field.hpp"

namespace higgsflow {

namespace detail {

struct ExprNode {
  enum class Kind { kConst, kCoord, kAdd, kSub, kMul, kDiv, kNeg, kSin, kCos, kExp };
  Kind kind = Kind::kConst;
  cd value{0.0, 0.0};  // kConst
  int axis = 0;        // kCoord
  std::unique_ptr<ExprNode> a, b;

  cd eval(const std::array<double, 4>& x) const {
    switch (kind) {
      case Kind::kConst: return value;
      case Kind::kCoord: return cd{x[axis], 0.0};
      case Kind::kAdd: return a->eval(x) + b->eval(x);
      case Kind::kSub: return a->eval(x) - b->eval(x);
      case Kind::kMul: return a->eval(x) * b->eval(x);
      case Kind::kDiv: return a->eval(x) / b->eval(x);
      case Kind::kNeg: return -a->eval(x);
      case Kind::kSin: return std::sin(a->eval(x));
      case Kind::kCos: return std::cos(a->eval(x));
      case Kind::kExp: return std::exp(a->eval(x));
    }
    return cd{0.0, 0.0};
  }
};

// Recursive-descent parser over a character buffer.
class ExprParser {
 public:
  ExprParser(const std::string& src, int dims) : src_(src), dims_(dims) {}

  std::unique_ptr<ExprNode> parse() {
    skip_space();
    require(pos_ < src_.size(), "expression: empty input");
    auto e = parse_sum();
    skip_space();
    require(pos_ == src_.size(),
            "expression: trailing input at '" + src_.substr(pos_) + "'");
    return e;
  }

 private:
  const std::string& src_;
  int dims_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  std::unique_ptr<ExprNode> parse_sum() {
    auto e = parse_product();
    for (;;) {
      if (eat('+')) {
        auto n = std::make_unique<ExprNode>();
        n->kind = ExprNode::Kind::kAdd;
        n->a = std::move(e);
        n->b = parse_product();
        e = std::move(n);
      } else if (eat('-')) {
        auto n = std::make_unique<ExprNode>();
        n->kind = ExprNode::Kind::kSub;
        n->a = std::move(e);
        n->b = parse_product();
        e = std::move(n);
      } else {
        return e;
      }
    }
  }

  std::unique_ptr<ExprNode> parse_product() {
    auto e = parse_unary();
    for (;;) {
      if (eat('*')) {
        auto n = std::make_unique<ExprNode>();
        n->kind = ExprNode::Kind::kMul;
        n->a = std::move(e);
        n->b = parse_unary();
        e = std::move(n);
      } else if (eat('/')) {
        auto n = std::make_unique<ExprNode>();
        n->kind = ExprNode::Kind::kDiv;
        n->a = std::move(e);
        n->b = parse_unary();
        e = std::move(n);
      } else {
        return e;
      }
    }
  }

  std::unique_ptr<ExprNode> parse_unary() {
    if (eat('-')) {
      auto n = std::make_unique<ExprNode>();
      n->kind = ExprNode::Kind::kNeg;
      n->a = parse_unary();
      return n;
    }
    return parse_primary();
  }

  std::unique_ptr<ExprNode> parse_primary() {
    skip_space();
    require(pos_ < src_.size(), "expression: unexpected end of input");
    char c = src_[pos_];

    if (c == '(') {
      ++pos_;
      auto e = parse_sum();
      require(eat(')'), "expression: missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_word();
    throw Error(std::string("expression: unexpected character '") + c + "'");
  }

  std::unique_ptr<ExprNode> parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
          ++pos_;
      } else {
        pos_ = mark;  // bare 'e' belongs to the next token, not this literal
      }
    }
    const std::string text = src_.substr(start, pos_ - start);
    try {
      auto n = std::make_unique<ExprNode>();
      n->value = cd{std::stod(text), 0.0};
      return n;
    } catch (const std::exception&) {
      throw Error("expression: bad numeric literal '" + text + "'");
    }
  }

  std::unique_ptr<ExprNode> parse_word() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string word = src_.substr(start, pos_ - start);

    if (word == "i") {
      auto n = std::make_unique<ExprNode>();
      n->value = cd{0.0, 1.0};
      return n;
    }
    if (word == "pi") {
      auto n = std::make_unique<ExprNode>();
      n->value = cd{kPi, 0.0};
      return n;
    }
    if (word.size() >= 2 && word[0] == 'x') {
      int axis = -1;
      if (word.size() == 2 && word[1] >= '0' && word[1] <= '9') axis = word[1] - '0';
      require(axis >= 0 && axis <= 3,
              "expression: unknown coordinate '" + word + "'");
      require(axis < dims_, "expression: coordinate '" + word +
                                "' exceeds the grid dimension");
      auto n = std::make_unique<ExprNode>();
      n->kind = ExprNode::Kind::kCoord;
      n->axis = axis;
      return n;
    }

    ExprNode::Kind k;
    if (word == "sin") {
      k = ExprNode::Kind::kSin;
    } else if (word == "cos") {
      k = ExprNode::Kind::kCos;
    } else if (word == "exp") {
      k = ExprNode::Kind::kExp;
    } else {
      throw Error("expression: unknown name '" + word + "'");
    }
    require(eat('('), "expression: '" + word + "' needs parentheses");
    auto arg = parse_sum();
    require(eat(')'), "expression: missing ')' after '" + word + "'");
    auto n = std::make_unique<ExprNode>();
    n->kind = k;
    n->a = std::move(arg);
    return n;
  }
};

}  // namespace detail

// Parsed expression; cheap to evaluate repeatedly and safe to move around.
class Expression {
 public:
  Expression() = default;
  cd eval(const std::array<double, 4>& x) const {
    require(root_ != nullptr, "expression: evaluating an empty expression");
    return root_->eval(x);
  }

 private:
  std::shared_ptr<const detail::ExprNode> root_;
  explicit Expression(std::unique_ptr<detail::ExprNode> r) : root_(std::move(r)) {}
  friend Expression parse_expression(const std::string&, int);
};

// dims: number of real lattice axes available as coordinates (2n).
inline Expression parse_expression(const std::string& src, int dims) {
  detail::ExprParser p(src, dims);
  return Expression(p.parse());
}

// Evaluate at every site in physical coordinates x_a = c_a * period_a / N.
inline ScalarField evaluate_on_grid(const Grid& g, const Expression& e) {
  ScalarField f(g);
  std::array<double, 4> x{0.0, 0.0, 0.0, 0.0};
  for (std::size_t s = 0; s < g.sites(); ++s) {
    auto c = g.coords(s);
    for (int a = 0; a < g.dims(); ++a)
      x[a] = c[a] * g.period(a) / static_cast<double>(g.N());
    f[s] = e.eval(x);
  }
  return f;
}

}  // namespace higgsflow
