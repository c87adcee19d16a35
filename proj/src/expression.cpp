#include "relaxbv/expression.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "relaxbv/errors.hpp"

namespace relaxbv {

struct Expression::Node {
  enum class Kind { Number, Var, Binary, Unary, Call } kind;
  double number = 0.0;
  std::string name;  // variable, function, or operator symbol
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Number;
  n->number = v;
  return n;
}

NodePtr make_node(Node::Kind kind, std::string name, std::vector<NodePtr> args) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->name = std::move(name);
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Node::Kind::Binary, "+", {lhs, term()});
      } else if (accept('-')) {
        lhs = make_node(Node::Kind::Binary, "-", {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Node::Kind::Binary, "*", {lhs, unary()});
      } else if (accept('/')) {
        lhs = make_node(Node::Kind::Binary, "/", {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_node(Node::Kind::Unary, "-", {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_node(Node::Kind::Binary, "^", {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail("unexpected character");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    const std::string lexeme(text_.substr(start, pos_ - start));
    if (lexeme == ".") {
      pos_ = start;
      fail("malformed number");
    }
    char* end = nullptr;
    const double v = std::strtod(lexeme.c_str(), &end);
    if (end != lexeme.c_str() + lexeme.size()) {
      pos_ = start;
      fail("malformed number");
    }
    return make_number(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    if (id == "p" || id == "x1" || id == "x2") return make_node(Node::Kind::Var, id, {});
    if (id == "abs" || id == "sqrt" || id == "min" || id == "max") {
      if (!accept('(')) fail("expected '(' after " + id);
      std::vector<NodePtr> args{expr()};
      while (accept(',')) args.push_back(expr());
      if (!accept(')')) fail("expected ')'");
      const bool unary_fn = id == "abs" || id == "sqrt";
      if (unary_fn && args.size() != 1) {
        pos_ = start;
        fail(id + " takes exactly one argument");
      }
      if (!unary_fn && args.size() < 2) {
        pos_ = start;
        fail(id + " takes at least two arguments");
      }
      return make_node(Node::Kind::Call, id, std::move(args));
    }
    pos_ = start;
    fail("unknown identifier '" + id + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // Negative literals are printed through the unary minus of the caller.
  return s;
}

void render(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Number:
      if (n.number < 0 || std::signbit(n.number)) {
        out += "(-";
        out += format_number(-n.number);
        out += ")";
      } else {
        out += format_number(n.number);
      }
      break;
    case Node::Kind::Var:
      out += n.name;
      break;
    case Node::Kind::Unary:
      out += "(-";
      render(*n.args[0], out);
      out += ")";
      break;
    case Node::Kind::Binary:
      out += "(";
      render(*n.args[0], out);
      out += n.name;
      render(*n.args[1], out);
      out += ")";
      break;
    case Node::Kind::Call:
      out += n.name;
      out += "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ",";
        render(*n.args[i], out);
      }
      out += ")";
      break;
  }
}

}  // namespace

class ExpressionCompiler {
 public:
  using Op = Expression::Op;

  static void compile(const Node& n, Expression& e, int depth) {
    switch (n.kind) {
      case Node::Kind::Number:
        e.program_.push_back({Op::Const, n.number, 0});
        break;
      case Node::Kind::Var:
        if (n.name == "p") {
          e.program_.push_back({Op::VarP, 0.0, 0});
        } else if (n.name == "x1") {
          e.program_.push_back({Op::VarX1, 0.0, 0});
          e.uses_x_ = true;
        } else {
          e.program_.push_back({Op::VarX2, 0.0, 0});
          e.uses_x_ = true;
        }
        break;
      case Node::Kind::Unary:
        compile(*n.args[0], e, depth);
        e.program_.push_back({Op::Neg, 0.0, 0});
        break;
      case Node::Kind::Binary: {
        compile(*n.args[0], e, depth);
        compile(*n.args[1], e, depth + 1);
        Op op = Op::Add;
        switch (n.name[0]) {
          case '+': op = Op::Add; break;
          case '-': op = Op::Sub; break;
          case '*': op = Op::Mul; break;
          case '/': op = Op::Div; break;
          default: op = Op::Pow; break;
        }
        e.program_.push_back({op, 0.0, 0});
        break;
      }
      case Node::Kind::Call: {
        for (std::size_t i = 0; i < n.args.size(); ++i) compile(*n.args[i], e, depth + static_cast<int>(i));
        Op op = n.name == "abs" ? Op::Abs : n.name == "sqrt" ? Op::Sqrt : n.name == "min" ? Op::Min : Op::Max;
        e.program_.push_back({op, 0.0, static_cast<int>(n.args.size())});
        break;
      }
    }
    (void)depth;
  }

  static int stack_depth(const Expression& e) {
    int h = 0, peak = 0;
    for (const auto& in : e.program_) {
      switch (in.op) {
        case Op::Const: case Op::VarP: case Op::VarX1: case Op::VarX2: ++h; break;
        case Op::Neg: case Op::Abs: case Op::Sqrt: break;
        case Op::Min: case Op::Max: h -= in.arity - 1; break;
        default: --h; break;
      }
      peak = std::max(peak, h);
    }
    return peak;
  }
};

namespace {
constexpr int kMaxStack = 64;
}

Expression Expression::parse(std::string_view text) {
  Parser parser(text);
  Expression e;
  e.root_ = parser.parse();
  ExpressionCompiler::compile(*e.root_, e, 0);
  e.max_stack_ = ExpressionCompiler::stack_depth(e);
  if (e.max_stack_ > kMaxStack) throw ParseError("expression nested too deeply", 0);
  return e;
}

double Expression::evaluate(double p, double x1, double x2) const {
  std::array<double, kMaxStack> st;
  int top = 0;
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::Const: st[top++] = in.value; break;
      case Op::VarP: st[top++] = p; break;
      case Op::VarX1: st[top++] = x1; break;
      case Op::VarX2: st[top++] = x2; break;
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Abs: st[top - 1] = std::abs(st[top - 1]); break;
      case Op::Sqrt: st[top - 1] = std::sqrt(st[top - 1]); break;
      case Op::Min:
      case Op::Max: {
        const int first = top - in.arity;
        double r = st[first];
        for (int i = first + 1; i < top; ++i) r = in.op == Op::Min ? std::min(r, st[i]) : std::max(r, st[i]);
        top = first;
        st[top++] = r;
        break;
      }
      default: {
        const double b = st[--top];
        double& a = st[top - 1];
        switch (in.op) {
          case Op::Add: a = a + b; break;
          case Op::Sub: a = a - b; break;
          case Op::Mul: a = a * b; break;
          case Op::Div: a = a / b; break;
          default: a = std::pow(a, b); break;
        }
      }
    }
  }
  return st[0];
}

std::string Expression::to_string() const {
  std::string out;
  render(*root_, out);
  return out;
}

}  // namespace relaxbv
