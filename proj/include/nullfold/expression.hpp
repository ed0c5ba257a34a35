#pragma once

// Small arithmetic expression language used by scenario files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | identifier | function '(' expr ')' | '(' expr ')'
//
// Functions: sin cos tan exp log sqrt sinh cosh tanh abs. Constant: pi.

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nullfold/error.hpp"
#include "nullfold/jet.hpp"

namespace nullfold {

enum class Func { Sin, Cos, Tan, Exp, Log, Sqrt, Sinh, Cosh, Tanh, Abs };

struct ExprNode;

class BoundExpression;

class Expression {
 public:
  Expression();  // the constant 0
  static Expression parse(std::string_view source);
  static Expression constant(double value);

  const std::string& source() const { return source_; }
  std::string to_string() const;
  // Identifiers referenced, sorted and unique.
  std::vector<std::string> variables() const;

  // Replaces identifiers by other expressions (named constants of a scenario).
  Expression substitute(const std::map<std::string, Expression>& defs) const;

  // Resolves identifiers against an ordered variable list; unknown names throw.
  BoundExpression bind(const std::vector<std::string>& names) const;

  const ExprNode& root() const { return *root_; }

  // Structural combinators used to build derived expressions.
  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator*(double a, const Expression& b);

 private:
  explicit Expression(std::shared_ptr<const ExprNode> root);
  std::string source_;
  std::shared_ptr<const ExprNode> root_;
};

class BoundExpression {
 public:
  BoundExpression() = default;

  template <class S>
  S eval(const S* vars) const;

  template <class S>
  S eval(std::span<const S> vars) const {
    return eval(vars.data());
  }

  double operator()(std::span<const double> vars) const { return eval(vars.data()); }
  double operator()(std::initializer_list<double> vars) const { return eval(std::data(vars)); }

  // Exact partial derivative with respect to bound variable `index`.
  double derivative(std::span<const double> vars, int index) const;

  bool is_constant() const { return uses_.empty(); }
  int arity() const { return arity_; }
  // Indices of bound variables the expression actually reads.
  const std::vector<int>& uses() const { return uses_; }
  const std::string& text() const { return text_; }

 private:
  friend class Expression;
  enum class Op : unsigned char { Const, Var, Neg, Add, Sub, Mul, Div, Pow, PowConst, Call };
  struct Instr {
    Op op;
    Func func;
    int index;
    double value;
  };
  std::vector<Instr> code_;
  std::vector<int> uses_;
  int depth_ = 0;
  int arity_ = 0;
  std::string text_;
};

namespace detail {

template <class S>
S apply(Func f, const S& x) {
  using std::abs, std::cos, std::cosh, std::exp, std::log, std::sin, std::sinh, std::sqrt,
      std::tan, std::tanh;
  switch (f) {
    case Func::Sin: return sin(x);
    case Func::Cos: return cos(x);
    case Func::Tan: return tan(x);
    case Func::Exp: return exp(x);
    case Func::Log: return log(x);
    case Func::Sqrt: return sqrt(x);
    case Func::Sinh: return sinh(x);
    case Func::Cosh: return cosh(x);
    case Func::Tanh: return tanh(x);
    case Func::Abs: return abs(x);
  }
  return x;
}

inline double pow_const(double a, double c) { return std::pow(a, c); }
template <int O>
Jet<O> pow_const(const Jet<O>& a, double c) {
  return pow(a, c);
}
inline double pow_any(double a, double b) { return std::pow(a, b); }
template <int O>
Jet<O> pow_any(const Jet<O>& a, const Jet<O>& b) {
  return pow(a, b);
}

}  // namespace detail

// GCC cannot see that every slot is written before st[0] is read.
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wmaybe-uninitialized"
#endif
template <class S>
S BoundExpression::eval(const S* vars) const {
  constexpr int kInline = 24;
  std::array<S, kInline> inline_stack;
  std::vector<S> heap;
  S* st = inline_stack.data();
  if (depth_ > kInline) {
    heap.resize(depth_);
    st = heap.data();
  }
  int top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[top++] = S(in.value); break;
      case Op::Var: st[top++] = vars[in.index]; break;
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Add: st[top - 2] = st[top - 2] + st[top - 1]; --top; break;
      case Op::Sub: st[top - 2] = st[top - 2] - st[top - 1]; --top; break;
      case Op::Mul: st[top - 2] = st[top - 2] * st[top - 1]; --top; break;
      case Op::Div: st[top - 2] = st[top - 2] / st[top - 1]; --top; break;
      case Op::Pow: st[top - 2] = detail::pow_any(st[top - 2], st[top - 1]); --top; break;
      case Op::PowConst: st[top - 1] = detail::pow_const(st[top - 1], in.value); break;
      case Op::Call: st[top - 1] = detail::apply(in.func, st[top - 1]); break;
    }
  }
  return st[0];
}
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic pop
#endif

// Convenience for tests and one-off evaluation.
double evaluate(const Expression& e, const std::vector<std::string>& names,
                std::span<const double> values);

}  // namespace nullfold
