#include "flowlab/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace flowlab {

struct Expression::Node {
  enum class Kind { Number, Time, Kappa, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Abs, Sign, Indicator };
  Kind kind = Kind::Number;
  double value = 0.0;  // literal, or radius for Indicator
  bool strict = false; // Indicator uses '<' instead of '<='
  int var = 0;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double t, const Vec& x, double kappa) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::Time: return t;
      case Kind::Kappa: return kappa;
      case Kind::Var: return x(var);
      case Kind::Neg: return -lhs->eval(t, x, kappa);
      case Kind::Add: return lhs->eval(t, x, kappa) + rhs->eval(t, x, kappa);
      case Kind::Sub: return lhs->eval(t, x, kappa) - rhs->eval(t, x, kappa);
      case Kind::Mul: return lhs->eval(t, x, kappa) * rhs->eval(t, x, kappa);
      case Kind::Div: return lhs->eval(t, x, kappa) / rhs->eval(t, x, kappa);
      case Kind::Pow: return std::pow(lhs->eval(t, x, kappa), rhs->eval(t, x, kappa));
      case Kind::Exp: return std::exp(lhs->eval(t, x, kappa));
      case Kind::Log: return std::log(lhs->eval(t, x, kappa));
      case Kind::Abs: return std::abs(lhs->eval(t, x, kappa));
      case Kind::Sign: {
        const double v = lhs->eval(t, x, kappa);
        return static_cast<double>((v > 0.0) - (v < 0.0));
      }
      case Kind::Indicator: {
        const double r = x.norm();
        return (strict ? r < value : r <= value) ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse_all() {
    NodePtr n = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return n;
  }

  int max_var() const { return max_var_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::Parse,
                "expression '" + std::string(src_) + "': " + msg + " at column " + std::to_string(pos_ + 1));
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip();
    if (src_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!accept(token)) fail("expected '" + std::string(token) + "'");
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept("+")) n = make(Kind::Add, n, term());
      else if (accept("-")) n = make(Kind::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept("*")) n = make(Kind::Mul, n, unary());
      else if (accept("/")) n = make(Kind::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept("-")) return make(Kind::Neg, unary());
    if (accept("+")) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept("^")) return make(Kind::Pow, base, unary());
    return base;
  }

  double number() {
    skip();
    const char* begin = src_.data() + pos_;
    char* end = nullptr;
    const std::string tail(begin, src_.size() - pos_);
    const double v = std::strtod(tail.c_str(), &end);
    const auto used = static_cast<std::size_t>(end - tail.c_str());
    if (used == 0) fail("expected a number");
    pos_ += used;
    return v;
  }

  std::string identifier() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  NodePtr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      expect(")");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Number;
      n->value = number();
      return n;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail(std::string("unexpected character '") + c + "'");

    const std::string id = identifier();
    if (id == "t") return make(Kind::Time);
    if (id == "kappa") return make(Kind::Kappa);
    if (id == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->value = 3.14159265358979323846;
      return n;
    }
    if (id.size() >= 2 && id[0] == 'x') {
      const std::string digits = id[1] == '_' ? id.substr(2) : id.substr(1);
      if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
        const int index = std::stoi(digits);
        if (index < 1 || index > kMaxDim) fail("variable index out of range: " + id);
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::Var;
        n->var = index - 1;
        max_var_ = std::max(max_var_, index);
        return n;
      }
    }
    if (id == "indicator") {
      expect("(");
      expect("|");
      expect("x");
      expect("|");
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Indicator;
      if (accept("<=")) n->strict = false;
      else if (accept("<")) n->strict = true;
      else fail("expected '<=' or '<' in indicator");
      n->value = number();
      expect(")");
      return n;
    }
    if (id == "pow") {
      expect("(");
      NodePtr a = expr();
      expect(",");
      NodePtr b = expr();
      expect(")");
      return make(Kind::Pow, a, b);
    }
    Kind fn;
    if (id == "exp") fn = Kind::Exp;
    else if (id == "log") fn = Kind::Log;
    else if (id == "abs") fn = Kind::Abs;
    else if (id == "sign") fn = Kind::Sign;
    else fail("unknown identifier '" + id + "'");
    expect("(");
    NodePtr arg = expr();
    expect(")");
    return make(fn, arg);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int max_var_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view source) {
  Parser p(source);
  Expression e;
  e.root_ = p.parse_all();
  e.source_ = std::string(source);
  e.max_var_ = p.max_var();
  return e;
}

double Expression::eval(double t, const Vec& x, double kappa) const {
  if (x.size() < max_var_)
    throw Error(ErrorCode::InvalidArgument, "expression '" + source_ + "' needs dimension " + std::to_string(max_var_));
  return root_->eval(t, x, kappa);
}

}  // namespace flowlab
