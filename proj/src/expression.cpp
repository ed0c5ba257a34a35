#include "nullfold/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numbers>
#include <set>

namespace nullfold {

struct ExprNode {
  enum class Kind { Number, Pi, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Number;
  double value = 0.0;
  std::string name;
  Func func = Func::Sin;
  std::size_t offset = 0;
  std::shared_ptr<const ExprNode> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

struct FuncName {
  const char* name;
  Func func;
};
constexpr FuncName kFunctions[] = {
    {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},   {"exp", Func::Exp},
    {"log", Func::Log},   {"sqrt", Func::Sqrt}, {"sinh", Func::Sinh}, {"cosh", Func::Cosh},
    {"tanh", Func::Tanh}, {"abs", Func::Abs},
};

const char* func_name(Func f) {
  for (const auto& fn : kFunctions)
    if (fn.func == f) return fn.name;
  return "?";
}

std::string syntax_message(std::size_t offset, const std::string& what) {
  return "syntax error at offset " + std::to_string(offset) + ": " + what;
}

NodePtr make(ExprNode::Kind kind, std::size_t offset, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->offset = offset;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    skip();
    if (pos_ >= s_.size()) throw error(pos_, "empty expression");
    NodePtr e = expr();
    skip();
    if (pos_ < s_.size()) throw error(pos_, std::string("unexpected '") + s_[pos_] + "'");
    return e;
  }

 private:
  ExpressionError error(std::size_t at, const std::string& what) const {
    return ExpressionError(ExpressionError::Reason::Syntax, at, syntax_message(at, what));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      if (peek('+')) {
        const std::size_t at = pos_++;
        lhs = make(ExprNode::Kind::Add, at, lhs, term());
      } else if (peek('-')) {
        const std::size_t at = pos_++;
        lhs = make(ExprNode::Kind::Sub, at, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (peek('*')) {
        const std::size_t at = pos_++;
        lhs = make(ExprNode::Kind::Mul, at, lhs, unary());
      } else if (peek('/')) {
        const std::size_t at = pos_++;
        lhs = make(ExprNode::Kind::Div, at, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (peek('-')) {
      const std::size_t at = pos_++;
      return make(ExprNode::Kind::Neg, at, unary());
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (peek('^')) {
      const std::size_t at = pos_++;
      return make(ExprNode::Kind::Pow, at, base, unary());
    }
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) throw error(pos_, "unexpected end of input");
    const char c = s_[pos_];
    const std::size_t at = pos_;
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!peek(')')) throw error(pos_, "expected ')'");
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string name(s_.substr(at, pos_ - at));
      if (peek('(')) return call(name, at);
      if (name == "pi") return make(ExprNode::Kind::Pi, at);
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Variable;
      n->name = std::move(name);
      n->offset = at;
      return n;
    }
    throw error(at, std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    const std::size_t at = pos_;
    std::size_t p = pos_;
    while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
    if (p < s_.size() && s_[p] == '.') {
      ++p;
      while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
    }
    if (p < s_.size() && (s_[p] == 'e' || s_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        while (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) ++q;
        p = q;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + at, s_.data() + p, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + p) throw error(at, "malformed number");
    pos_ = p;
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Number;
    n->value = v;
    n->offset = at;
    return n;
  }

  NodePtr call(const std::string& name, std::size_t at) {
    const FuncName* fn = nullptr;
    for (const auto& f : kFunctions)
      if (name == f.name) fn = &f;
    if (!fn)
      throw ExpressionError(ExpressionError::Reason::UnknownFunction, at,
                            "unknown function '" + name + "' at offset " + std::to_string(at));
    ++pos_;  // '('
    std::vector<NodePtr> args;
    if (!peek(')')) {
      args.push_back(expr());
      while (peek(',')) {
        ++pos_;
        args.push_back(expr());
      }
    }
    if (!peek(')')) throw error(pos_, "expected ')'");
    ++pos_;
    if (args.size() != 1)
      throw ExpressionError(ExpressionError::Reason::Arity, at,
                            "function '" + name + "' takes 1 argument, got " +
                                std::to_string(args.size()) + " at offset " + std::to_string(at));
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Call;
    n->func = fn->func;
    n->offset = at;
    n->a = args[0];
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

int precedence(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Kind::Add:
    case ExprNode::Kind::Sub: return 1;
    case ExprNode::Kind::Mul:
    case ExprNode::Kind::Div: return 2;
    case ExprNode::Kind::Neg: return 3;
    case ExprNode::Kind::Pow: return 4;
    default: return 5;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print(const ExprNode& n, std::string& out) {
  auto child = [&](const ExprNode& c, bool paren) {
    if (paren) out += '(';
    print(c, out);
    if (paren) out += ')';
  };
  const int p = precedence(n);
  switch (n.kind) {
    case ExprNode::Kind::Number: out += format_number(n.value); return;
    case ExprNode::Kind::Pi: out += "pi"; return;
    case ExprNode::Kind::Variable: out += n.name; return;
    case ExprNode::Kind::Neg:
      out += '-';
      child(*n.a, precedence(*n.a) < 3);
      return;
    case ExprNode::Kind::Call:
      out += func_name(n.func);
      child(*n.a, true);
      return;
    case ExprNode::Kind::Pow:
      child(*n.a, precedence(*n.a) <= 4);
      out += '^';
      child(*n.b, precedence(*n.b) < 3);
      return;
    default: {
      const char op = n.kind == ExprNode::Kind::Add   ? '+'
                      : n.kind == ExprNode::Kind::Sub ? '-'
                      : n.kind == ExprNode::Kind::Mul ? '*'
                                                      : '/';
      child(*n.a, precedence(*n.a) < p);
      out += op;
      child(*n.b, precedence(*n.b) <= p && precedence(*n.b) != 3);
      return;
    }
  }
}

void collect(const ExprNode& n, std::set<std::string>& names) {
  if (n.kind == ExprNode::Kind::Variable) names.insert(n.name);
  if (n.a) collect(*n.a, names);
  if (n.b) collect(*n.b, names);
}

bool is_literal(const ExprNode& n, double& v) {
  if (n.kind == ExprNode::Kind::Number) {
    v = n.value;
    return true;
  }
  if (n.kind == ExprNode::Kind::Pi) {
    v = std::numbers::pi;
    return true;
  }
  if (n.kind == ExprNode::Kind::Neg && is_literal(*n.a, v)) {
    v = -v;
    return true;
  }
  return false;
}

}  // namespace

Expression::Expression() : Expression(constant(0.0)) {}

Expression::Expression(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {
  source_ = to_string();
}

Expression Expression::parse(std::string_view source) {
  Parser p(source);
  Expression e(p.parse());
  e.source_ = std::string(source);
  return e;
}

Expression Expression::constant(double value) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Number;
  n->value = std::abs(value);
  NodePtr node = n;
  if (value < 0.0) node = make(ExprNode::Kind::Neg, 0, node);
  return Expression(node);
}

std::string Expression::to_string() const {
  std::string out;
  print(*root_, out);
  return out;
}

std::vector<std::string> Expression::variables() const {
  std::set<std::string> names;
  collect(*root_, names);
  return {names.begin(), names.end()};
}

Expression Expression::substitute(const std::map<std::string, Expression>& defs) const {
  auto rec = [&](auto&& self, const NodePtr& n) -> NodePtr {
    if (n->kind == ExprNode::Kind::Variable) {
      auto it = defs.find(n->name);
      return it == defs.end() ? n : it->second.root_;
    }
    if (!n->a) return n;
    auto copy = std::make_shared<ExprNode>(*n);
    copy->a = self(self, n->a);
    if (n->b) copy->b = self(self, n->b);
    return copy;
  };
  Expression out(rec(rec, root_));
  return out;
}

Expression operator+(const Expression& a, const Expression& b) {
  return Expression(make(ExprNode::Kind::Add, 0, a.root_, b.root_));
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression(make(ExprNode::Kind::Mul, 0, a.root_, b.root_));
}
Expression operator*(double a, const Expression& b) { return Expression::constant(a) * b; }

BoundExpression Expression::bind(const std::vector<std::string>& names) const {
  BoundExpression be;
  be.arity_ = static_cast<int>(names.size());
  be.text_ = source_;
  std::set<int> used;
  int depth = 0;
  using Op = BoundExpression::Op;
  auto emit = [&](auto&& self, const ExprNode& n) -> void {
    BoundExpression::Instr in{Op::Const, Func::Sin, 0, 0.0};
    switch (n.kind) {
      case ExprNode::Kind::Number: in.value = n.value; break;
      case ExprNode::Kind::Pi: in.value = std::numbers::pi; break;
      case ExprNode::Kind::Variable: {
        auto it = std::find(names.begin(), names.end(), n.name);
        if (it == names.end())
          throw ExpressionError(ExpressionError::Reason::UnknownIdentifier, n.offset,
                                "unknown variable '" + n.name + "' at offset " +
                                    std::to_string(n.offset) + " in '" + source_ + "'");
        in.op = Op::Var;
        in.index = static_cast<int>(it - names.begin());
        used.insert(in.index);
        break;
      }
      case ExprNode::Kind::Neg: self(self, *n.a); in.op = Op::Neg; break;
      case ExprNode::Kind::Call:
        self(self, *n.a);
        in.op = Op::Call;
        in.func = n.func;
        break;
      case ExprNode::Kind::Pow: {
        double c = 0.0;
        self(self, *n.a);
        if (is_literal(*n.b, c)) {
          in.op = Op::PowConst;
          in.value = c;
        } else {
          self(self, *n.b);
          in.op = Op::Pow;
        }
        break;
      }
      default:
        self(self, *n.a);
        self(self, *n.b);
        in.op = n.kind == ExprNode::Kind::Add   ? Op::Add
                : n.kind == ExprNode::Kind::Sub ? Op::Sub
                : n.kind == ExprNode::Kind::Mul ? Op::Mul
                                                : Op::Div;
        break;
    }
    be.code_.push_back(in);
  };
  emit(emit, *root_);
  // Stack depth by simulation.
  int top = 0;
  for (const auto& in : be.code_) {
    switch (in.op) {
      case Op::Const:
      case Op::Var: ++top; break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow: --top; break;
      default: break;
    }
    depth = std::max(depth, top);
  }
  be.depth_ = depth;
  be.uses_.assign(used.begin(), used.end());
  return be;
}

double BoundExpression::derivative(std::span<const double> vars, int index) const {
  std::vector<Jet1> x(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i)
    x[i] = static_cast<int>(i) == index ? Jet1::variable(vars[i], 0, 1) : Jet1(vars[i]);
  return eval(x.data()).d(0);
}

double evaluate(const Expression& e, const std::vector<std::string>& names,
                std::span<const double> values) {
  return e.bind(names)(values);
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Expression: return "expression";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::DegenerateMetric: return "degenerate-metric";
    case ErrorKind::Signature: return "signature";
    case ErrorKind::InvalidWarp: return "invalid-warp";
    case ErrorKind::IntegrationFailure: return "integration-failure";
    case ErrorKind::NotSpacelike: return "not-spacelike";
    case ErrorKind::FrameDegeneracy: return "frame-degeneracy";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::FrameContinuity: return "frame-continuity";
    case ErrorKind::NonCompactDomain: return "non-compact-domain";
    case ErrorKind::ChartMetadata: return "chart-metadata";
    case ErrorKind::TransportInconsistency: return "transport-inconsistency";
    case ErrorKind::InvalidRescale: return "invalid-rescale";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

bool Error::is_configuration() const {
  switch (kind_) {
    case ErrorKind::IntegrationFailure:
    case ErrorKind::TransportInconsistency: return false;
    default: return true;
  }
}

}  // namespace nullfold
