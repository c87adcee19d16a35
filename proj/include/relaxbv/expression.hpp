#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace relaxbv {

/// Compiled arithmetic expression over the variables p, x1, x2.
///
/// Grammar (see docs/density_grammar.md):
///
///     expr    = term { ("+" | "-") term } ;
///     term    = unary { ("*" | "/") unary } ;
///     unary   = ("+" | "-") unary | power ;
///     power   = primary [ "^" unary ] ;
///     primary = number | "p" | "x1" | "x2"
///             | func "(" expr { "," expr } ")" | "(" expr ")" ;
///     func    = "abs" | "sqrt" | "min" | "max" ;
///
/// min and max accept two or more arguments; abs and sqrt exactly one.
class Expression {
 public:
  static Expression parse(std::string_view text);

  double evaluate(double p, double x1, double x2) const;

  /// Canonical, fully parenthesised text; parse(to_string()) evaluates
  /// bit-identically to *this.
  std::string to_string() const;

  bool depends_on_x() const { return uses_x_; }

  struct Node;

 private:
  enum class Op : unsigned char { Const, VarP, VarX1, VarX2, Add, Sub, Mul, Div, Pow, Neg, Abs, Sqrt, Min, Max };
  struct Instr {
    Op op;
    double value;   // Const
    int arity;      // Min / Max
  };

  std::shared_ptr<const Node> root_;
  std::vector<Instr> program_;
  int max_stack_ = 0;
  bool uses_x_ = false;

  friend class ExpressionCompiler;
};

}  // namespace relaxbv
