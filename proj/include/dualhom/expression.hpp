#ifndef DUALHOM_EXPRESSION_HPP
#define DUALHOM_EXPRESSION_HPP

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dualhom/common.hpp"

namespace dualhom {

// Variables recognized by the coefficient grammar: time t, macro point
// x1..xd, cell point y1..yd.
enum class VarKind { Time, Macro, Cell };

struct ExprNode {
  enum class Kind { Number, Pi, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  enum class Fn { Sin, Cos, Exp, Abs };

  Kind kind = Kind::Number;
  double number = 0.0;
  VarKind var = VarKind::Time;
  int index = 0;  // 0-based component for Macro/Cell variables
  Fn fn = Fn::Sin;
  std::vector<std::shared_ptr<const ExprNode>> kids;
};

struct EvalContext {
  double t = 0.0;
  Vec2 x{0.0, 0.0};
  Vec2 y{0.0, 0.0};
};

// Immutable parsed expression. Parsing and evaluation are pure; instances are
// safe to share across threads.
class Expression {
 public:
  Expression() = default;

  // Grammar (see README):
  //   expr   := term (('+'|'-') term)*
  //   term   := factor (('*'|'/') factor)*
  //   factor := '-' factor | atom ('^' factor)?
  //   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
  // Identifiers: t, x1..xd, y1..yd, pi, sin, cos, exp, abs. '^' binds tighter
  // than unary minus; binary operators are left-associative, '^' right.
  static Expression parse(std::string_view source, int dim);

  // Canonical text form; parse(serialize()) reproduces the tree node for node.
  std::string serialize() const;

  double evaluate(const EvalContext& ctx) const;

  bool depends_on_time() const;
  bool depends_on_macro() const;
  bool depends_on_cell() const;

  bool identical(const Expression& other) const;

  bool empty() const { return root_ == nullptr; }
  int dim() const { return dim_; }
  const ExprNode* root() const { return root_.get(); }

 private:
  std::shared_ptr<const ExprNode> root_;
  int dim_ = 0;
};

}  // namespace dualhom

#endif
