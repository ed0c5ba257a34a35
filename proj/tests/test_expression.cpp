#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nullfold/expression.hpp"
#include "support.hpp"

using nullfold::Expression;
using nullfold::ExpressionError;

namespace {

double eval(const std::string& src, const std::vector<std::string>& names, std::vector<double> vals) {
  return Expression::parse(src).bind(names)(vals);
}

ExpressionError parse_error(const std::string& src) {
  try {
    Expression::parse(src);
  } catch (const ExpressionError& e) {
    return e;
  }
  FAIL("no error for '" << src << "'");
  return ExpressionError(ExpressionError::Reason::Syntax, 0, "");
}

}  // namespace

TEST_CASE("arithmetic examples") {
  CHECK(eval("2*t + sin(pi/2)", {"t"}, {1.5}) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(eval("(1-s)*exp(-(x^2+y^2))", {"s", "x", "y"}, {0, 0, 0}) == 1.0);
}

TEST_CASE("precedence and associativity") {
  CHECK(eval("-2^2", {}, {}) == -4.0);
  CHECK(eval("2^3^2", {}, {}) == 512.0);
  CHECK(eval("2^-1", {}, {}) == 0.5);
  CHECK(eval("8/2/2", {}, {}) == 2.0);
  CHECK(eval("8-2-2", {}, {}) == 4.0);
  CHECK(eval("2*3+4*5", {}, {}) == 26.0);
  CHECK(eval("-x*y", {"x", "y"}, {2, 3}) == -6.0);
  CHECK(eval("a--b", {"a", "b"}, {1, 2}) == 3.0);
  CHECK(eval("(-2)^2", {}, {}) == 4.0);
  CHECK(eval("1.5e-3*1E3", {}, {}) == doctest::Approx(1.5));
  CHECK(eval(".5 + 2.", {}, {}) == 2.5);
  CHECK(eval("abs(-3) + sqrt(16) + log(exp(2))", {}, {}) == doctest::Approx(9.0));
  CHECK(eval("cosh(0) + sinh(0) + tanh(0) + tan(0) + cos(0)", {}, {}) == 2.0);
}

TEST_CASE("syntax errors report byte offsets") {
  auto e = parse_error("2**t");
  CHECK(e.reason() == ExpressionError::Reason::Syntax);
  CHECK(e.offset() == 2);
  CHECK(parse_error("").offset() == 0);
  CHECK(parse_error("1 +").offset() == 3);
  CHECK(parse_error("(1+2").offset() == 4);
  CHECK(parse_error("3 $ 4").offset() == 2);
  CHECK(parse_error("sin(1").reason() == ExpressionError::Reason::Syntax);
}

TEST_CASE("function name and arity errors") {
  auto e = parse_error("foo(1)");
  CHECK(e.reason() == ExpressionError::Reason::UnknownFunction);
  CHECK(e.offset() == 0);
  auto a = parse_error("1 + sin(1, 2)");
  CHECK(a.reason() == ExpressionError::Reason::Arity);
  CHECK(a.offset() == 4);
  CHECK(parse_error("cos()").reason() == ExpressionError::Reason::Arity);
}

TEST_CASE("unknown identifiers are rejected at bind time") {
  auto e = Expression::parse("t + q");
  CHECK(e.variables() == std::vector<std::string>{"q", "t"});
  try {
    e.bind({"t", "s"});
    FAIL("expected bind failure");
  } catch (const ExpressionError& err) {
    CHECK(err.reason() == ExpressionError::Reason::UnknownIdentifier);
    CHECK(err.offset() == 4);
  }
}

TEST_CASE("pi is a constant, not a variable") {
  auto e = Expression::parse("2*pi");
  CHECK(e.variables().empty());
  CHECK(e.bind({})({}) == doctest::Approx(2 * std::numbers::pi));
}

TEST_CASE("substitution of named constants") {
  auto e = Expression::parse("(1-s)*h0").substitute({{"h0", Expression::parse("2")}});
  CHECK(e.variables() == std::vector<std::string>{"s"});
  CHECK(e.bind({"s"})({0.5}) == 1.0);
}

TEST_CASE("round trip print/parse is stable on generated expressions") {
  testsupport::Gen gen(11);
  const std::vector<std::string> vars{"t", "s", "x"};
  for (int k = 0; k < 300; ++k) {
    const std::string src = gen.expression(vars, 5);
    const Expression e = Expression::parse(src);
    const std::string printed = e.to_string();
    const Expression again = Expression::parse(printed);
    CHECK(again.to_string() == printed);
    std::vector<double> v{gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const double a = e.bind(vars)(v), b = again.bind(vars)(v);
    CHECK(a == b);
  }
  // Structure that needs explicit parentheses.
  for (const char* s : {"(a^b)^c", "a-(b-c)", "a/(b*c)", "(-a)^2", "-(a+b)", "a^-b", "--a", "a*-b"}) {
    const Expression e = Expression::parse(s);
    CHECK(Expression::parse(e.to_string()).to_string() == e.to_string());
    std::vector<double> v{1.3, 0.7, 1.9};
    CHECK(e.bind({"a", "b", "c"})(v) == Expression::parse(e.to_string()).bind({"a", "b", "c"})(v));
  }
}

TEST_CASE("exact derivatives agree with central differences") {
  testsupport::Gen gen(12);
  const std::vector<std::string> vars{"t", "s", "x"};
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    const auto be = Expression::parse(gen.expression(vars, 4)).bind(vars);
    std::vector<double> v{gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const int i = gen.integer(0, 2);
    const double exact = be.derivative(v, i);
    const double fd = testsupport::central_difference([&](const std::vector<double>& p) { return be(p); }, v, i);
    CHECK(std::abs(exact - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("second-order jets match nested differences") {
  using nullfold::Jet2;
  const auto be = Expression::parse("sin(x*y) + x^3/y + exp(x - y)^2").bind({"x", "y"});
  const double x = 0.4, y = 1.3;
  Jet2 v[2] = {Jet2::variable(x, 0, 2), Jet2::variable(y, 1, 2)};
  const Jet2 r = be.eval(v);
  auto f = [&](double a, double b) { return be({a, b}); };
  const double h = 1e-4;
  const double fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h);
  const double fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / (h * h);
  CHECK(r.dd(0, 1) == doctest::Approx(fxy).epsilon(1e-6));
  CHECK(r.dd(1, 0) == doctest::Approx(fxy).epsilon(1e-6));
  CHECK(r.dd(0, 0) == doctest::Approx(fxx).epsilon(1e-6));
}
