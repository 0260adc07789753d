#include "dualhom/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace dualhom {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;
using Kind = ExprNode::Kind;
using Fn = ExprNode::Fn;

NodePtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

struct Token {
  enum class Type { Number, Ident, Op, LParen, RParen, Comma, End };
  Type type = Type::End;
  double number = 0.0;
  std::string ident;
  char op = 0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_.type = Token::Type::End;
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.data() + pos_;
      char* end = nullptr;
      tok_.number = std::strtod(begin, &end);
      if (end == begin) throw ParseError("malformed number", pos_);
      pos_ += static_cast<std::size_t>(end - begin);
      tok_.type = Token::Type::Number;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      tok_.type = Token::Type::Ident;
      tok_.ident = std::string(src_.substr(start, pos_ - start));
      return;
    }
    ++pos_;
    switch (c) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^':
        tok_.type = Token::Type::Op;
        tok_.op = c;
        return;
      case '(':
        tok_.type = Token::Type::LParen;
        return;
      case ')':
        tok_.type = Token::Type::RParen;
        return;
      case ',':
        tok_.type = Token::Type::Comma;
        return;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", pos_ - 1);
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(std::string_view src, int dim) : lex_(src), dim_(dim) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    const Token& t = lex_.peek();
    if (t.type != Token::Type::End) throw ParseError("trailing input", t.offset);
    return e;
  }

 private:
  NodePtr parse_expr() {
    NodePtr left = parse_term();
    while (lex_.peek().type == Token::Type::Op &&
           (lex_.peek().op == '+' || lex_.peek().op == '-')) {
      const char op = lex_.take().op;
      NodePtr right = parse_term();
      ExprNode n;
      n.kind = (op == '+') ? Kind::Add : Kind::Sub;
      n.kids = {left, right};
      left = make_node(std::move(n));
    }
    return left;
  }

  NodePtr parse_term() {
    NodePtr left = parse_factor();
    while (lex_.peek().type == Token::Type::Op &&
           (lex_.peek().op == '*' || lex_.peek().op == '/')) {
      const char op = lex_.take().op;
      NodePtr right = parse_factor();
      ExprNode n;
      n.kind = (op == '*') ? Kind::Mul : Kind::Div;
      n.kids = {left, right};
      left = make_node(std::move(n));
    }
    return left;
  }

  // '^' binds tighter than unary minus and associates to the right.
  NodePtr parse_factor() {
    if (lex_.peek().type == Token::Type::Op && lex_.peek().op == '-') {
      lex_.take();
      NodePtr child = parse_factor();
      ExprNode n;
      n.kind = Kind::Neg;
      n.kids = {child};
      return make_node(std::move(n));
    }
    NodePtr base = parse_atom();
    if (lex_.peek().type == Token::Type::Op && lex_.peek().op == '^') {
      lex_.take();
      NodePtr expo = parse_factor();
      ExprNode n;
      n.kind = Kind::Pow;
      n.kids = {base, expo};
      return make_node(std::move(n));
    }
    return base;
  }

  NodePtr parse_atom() {
    Token t = lex_.take();
    switch (t.type) {
      case Token::Type::Number: {
        ExprNode n;
        n.kind = Kind::Number;
        n.number = t.number;
        return make_node(std::move(n));
      }
      case Token::Type::LParen: {
        NodePtr inner = parse_expr();
        expect_rparen(t.offset);
        return inner;
      }
      case Token::Type::Ident:
        return parse_ident(std::move(t));
      default:
        throw ParseError("expected number, identifier or '('", t.offset);
    }
  }

  NodePtr parse_ident(Token t) {
    const std::string& id = t.ident;
    if (lex_.peek().type == Token::Type::LParen) {
      Fn fn;
      if (id == "sin") {
        fn = Fn::Sin;
      } else if (id == "cos") {
        fn = Fn::Cos;
      } else if (id == "exp") {
        fn = Fn::Exp;
      } else if (id == "abs") {
        fn = Fn::Abs;
      } else {
        throw ParseError("unknown function '" + id + "'", t.offset);
      }
      lex_.take();  // '('
      std::vector<NodePtr> args;
      args.push_back(parse_expr());
      while (lex_.peek().type == Token::Type::Comma) {
        lex_.take();
        args.push_back(parse_expr());
      }
      expect_rparen(t.offset);
      if (args.size() != 1) {
        throw ParseError(id + " expects 1 argument, got " + std::to_string(args.size()),
                         t.offset);
      }
      ExprNode n;
      n.kind = Kind::Call;
      n.fn = fn;
      n.kids = std::move(args);
      return make_node(std::move(n));
    }
    if (id == "pi") {
      ExprNode n;
      n.kind = Kind::Pi;
      return make_node(std::move(n));
    }
    if (id == "t") {
      ExprNode n;
      n.kind = Kind::Var;
      n.var = VarKind::Time;
      return make_node(std::move(n));
    }
    if ((id[0] == 'x' || id[0] == 'y') && id.size() == 2 && id[1] >= '1' && id[1] <= '9') {
      const int index = id[1] - '1';
      if (index >= dim_) throw ParseError("unknown identifier " + id, t.offset);
      ExprNode n;
      n.kind = Kind::Var;
      n.var = (id[0] == 'x') ? VarKind::Macro : VarKind::Cell;
      n.index = index;
      return make_node(std::move(n));
    }
    throw ParseError("unknown identifier " + id, t.offset);
  }

  void expect_rparen(std::size_t open_offset) {
    Token t = lex_.take();
    if (t.type != Token::Type::RParen) {
      throw ParseError("missing ')' for '(' ", open_offset);
    }
  }

  Lexer lex_;
  int dim_;
};

double eval_node(const ExprNode& n, const EvalContext& ctx) {
  switch (n.kind) {
    case Kind::Number:
      return n.number;
    case Kind::Pi:
      return M_PI;
    case Kind::Var:
      switch (n.var) {
        case VarKind::Time:
          return ctx.t;
        case VarKind::Macro:
          return ctx.x[n.index];
        case VarKind::Cell:
          return ctx.y[n.index];
      }
      return 0.0;
    case Kind::Neg:
      return -eval_node(*n.kids[0], ctx);
    case Kind::Add:
      return eval_node(*n.kids[0], ctx) + eval_node(*n.kids[1], ctx);
    case Kind::Sub:
      return eval_node(*n.kids[0], ctx) - eval_node(*n.kids[1], ctx);
    case Kind::Mul:
      return eval_node(*n.kids[0], ctx) * eval_node(*n.kids[1], ctx);
    case Kind::Div: {
      const double num = eval_node(*n.kids[0], ctx);
      const double den = eval_node(*n.kids[1], ctx);
      if (den == 0.0) throw EvalError("division by zero");
      const double r = num / den;
      if (!std::isfinite(r)) throw EvalError("non-finite result in division");
      return r;
    }
    case Kind::Pow: {
      const double base = eval_node(*n.kids[0], ctx);
      const double expo = eval_node(*n.kids[1], ctx);
      const double r = std::pow(base, expo);
      if (!std::isfinite(r)) throw EvalError("non-finite result in power");
      return r;
    }
    case Kind::Call: {
      const double a = eval_node(*n.kids[0], ctx);
      double r = 0.0;
      switch (n.fn) {
        case Fn::Sin:
          r = std::sin(a);
          break;
        case Fn::Cos:
          r = std::cos(a);
          break;
        case Fn::Exp:
          r = std::exp(a);
          break;
        case Fn::Abs:
          r = std::fabs(a);
          break;
      }
      if (!std::isfinite(r)) throw EvalError("non-finite result in call");
      return r;
    }
  }
  throw EvalError("corrupt expression node");
}

int precedence(Kind k) {
  switch (k) {
    case Kind::Add:
    case Kind::Sub:
      return 1;
    case Kind::Mul:
    case Kind::Div:
      return 2;
    case Kind::Neg:
      return 3;
    case Kind::Pow:
      return 4;
    default:
      return 5;
  }
}

const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Sin:
      return "sin";
    case Fn::Cos:
      return "cos";
    case Fn::Exp:
      return "exp";
    case Fn::Abs:
      return "abs";
  }
  return "?";
}

void serialize_node(const ExprNode& n, std::string& out);

void serialize_child(const ExprNode& child, int parent_prec, bool needs_paren_on_tie,
                     std::string& out) {
  const int cp = precedence(child.kind);
  const bool paren = cp < parent_prec || (cp == parent_prec && needs_paren_on_tie);
  if (paren) out.push_back('(');
  serialize_node(child, out);
  if (paren) out.push_back(')');
}

void serialize_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case Kind::Number:
      out += format_double(n.number);
      return;
    case Kind::Pi:
      out += "pi";
      return;
    case Kind::Var:
      switch (n.var) {
        case VarKind::Time:
          out += "t";
          return;
        case VarKind::Macro:
          out += "x" + std::to_string(n.index + 1);
          return;
        case VarKind::Cell:
          out += "y" + std::to_string(n.index + 1);
          return;
      }
      return;
    case Kind::Neg:
      out.push_back('-');
      // parenthesize nested negation so the text stays within the grammar
      serialize_child(*n.kids[0], precedence(Kind::Neg), n.kids[0]->kind == Kind::Neg, out);
      return;
    case Kind::Add:
      serialize_child(*n.kids[0], 1, false, out);
      out += " + ";
      serialize_child(*n.kids[1], 1, true, out);
      return;
    case Kind::Sub:
      serialize_child(*n.kids[0], 1, false, out);
      out += " - ";
      serialize_child(*n.kids[1], 1, true, out);
      return;
    case Kind::Mul:
      serialize_child(*n.kids[0], 2, false, out);
      out += "*";
      serialize_child(*n.kids[1], 2, true, out);
      return;
    case Kind::Div:
      serialize_child(*n.kids[0], 2, false, out);
      out += "/";
      serialize_child(*n.kids[1], 2, true, out);
      return;
    case Kind::Pow:
      serialize_child(*n.kids[0], 4, true, out);  // left operand of '^' must be an atom
      out += "^";
      serialize_child(*n.kids[1], 4, false, out);  // right-associative
      return;
    case Kind::Call:
      out += fn_name(n.fn);
      out.push_back('(');
      serialize_node(*n.kids[0], out);
      out.push_back(')');
      return;
  }
}

bool depends_on(const ExprNode& n, VarKind kind) {
  if (n.kind == Kind::Var && n.var == kind) return true;
  for (const auto& k : n.kids) {
    if (depends_on(*k, kind)) return true;
  }
  return false;
}

bool nodes_identical(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Kind::Number:
      if (a.number != b.number) return false;
      break;
    case Kind::Var:
      if (a.var != b.var || a.index != b.index) return false;
      break;
    case Kind::Call:
      if (a.fn != b.fn) return false;
      break;
    default:
      break;
  }
  if (a.kids.size() != b.kids.size()) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i) {
    if (!nodes_identical(*a.kids[i], *b.kids[i])) return false;
  }
  return true;
}

}  // namespace

Expression Expression::parse(std::string_view source, int dim) {
  if (dim < 1 || dim > 2) throw ConfigError("expression dimension must be 1 or 2");
  Parser p(source, dim);
  Expression e;
  e.root_ = p.run();
  e.dim_ = dim;
  return e;
}

std::string Expression::serialize() const {
  if (!root_) return "";
  std::string out;
  serialize_node(*root_, out);
  return out;
}

double Expression::evaluate(const EvalContext& ctx) const {
  if (!root_) throw EvalError("evaluating empty expression");
  return eval_node(*root_, ctx);
}

bool Expression::depends_on_time() const { return root_ && depends_on(*root_, VarKind::Time); }
bool Expression::depends_on_macro() const { return root_ && depends_on(*root_, VarKind::Macro); }
bool Expression::depends_on_cell() const { return root_ && depends_on(*root_, VarKind::Cell); }

bool Expression::identical(const Expression& other) const {
  if (!root_ || !other.root_) return root_ == other.root_;
  return nodes_identical(*root_, *other.root_);
}

}  // namespace dualhom
