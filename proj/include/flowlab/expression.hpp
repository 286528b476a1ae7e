#pragma once

#include "flowlab/types.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace flowlab {

/// Compiled scalar expression over (t, x_1..x_d, kappa).
///
/// Grammar:
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | 't' | 'kappa' | x<i> | x_<i>
///            | ('pow' | 'exp' | 'log' | 'abs' | 'sign') '(' args ')'
///            | 'indicator' '(' '|x|' ('<=' | '<') number ')'
///            | '(' expr ')'
/// Variables x1..xd are 1-based. `indicator(|x|<=r)` uses the Euclidean norm.
class Expression {
 public:
  struct Node;

  static Expression parse(std::string_view source);

  double eval(double t, const Vec& x, double kappa = 0.0) const;

  /// Highest x index referenced (0 when the expression is state-free).
  int max_variable() const noexcept { return max_var_; }
  const std::string& source() const noexcept { return source_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  int max_var_ = 0;
};

}  // namespace flowlab
