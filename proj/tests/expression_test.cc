#include "asclf/expression.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace asclf {
namespace {

SymbolTable XY() {
  SymbolTable s;
  s.variables["x1"] = 0;
  s.variables["x2"] = 1;
  return s;
}

double Eval(const std::string& text, std::vector<double> vars) {
  return ParseExpression(text, XY()).Evaluate(vars);
}

TEST(ExpressionTest, ArithmeticAndPrecedence) {
  EXPECT_DOUBLE_EQ(Eval("1 + 2 * 3", {}), 7.0);
  EXPECT_DOUBLE_EQ(Eval("(1 + 2) * 3", {}), 9.0);
  EXPECT_DOUBLE_EQ(Eval("2 ^ 3 ^ 2", {}), 512.0);
  EXPECT_DOUBLE_EQ(Eval("-2 ^ 2", {}), -4.0);
  EXPECT_DOUBLE_EQ(Eval("8 / 4 / 2", {}), 1.0);
  EXPECT_DOUBLE_EQ(Eval("x1 - x2 - 1", {5, 2}), 2.0);
  EXPECT_DOUBLE_EQ(Eval("1.5e2 + .5", {}), 150.5);
}

TEST(ExpressionTest, Functions) {
  EXPECT_DOUBLE_EQ(Eval("sqrt(x1^2 + x2^2)", {3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(Eval("min(x1, x2) + max(x1, x2)", {3, -4}), -1.0);
  EXPECT_DOUBLE_EQ(Eval("abs(x1) * sign(x1)", {-3, 0}), -3.0);
  EXPECT_DOUBLE_EQ(Eval("step(x1) + step(x2)", {1, 0}), 1.0);
  EXPECT_NEAR(Eval("exp(log(x1)) + sin(0) + cos(0)", {2.5, 0}), 3.5, 1e-15);
}

TEST(ExpressionTest, ConstantsAreFolded) {
  SymbolTable s = XY();
  s.constants["c"] = 2.0;
  const Expression e = ParseExpression("c * x1", s);
  EXPECT_DOUBLE_EQ(e.Evaluate(std::vector<double>{3, 0}), 6.0);
  EXPECT_EQ(e.MaxSlot(), 0);
}

TEST(ExpressionTest, RotationalDriftAtUnitPoint) {
  SymbolTable s = XY();
  s.constants["c"] = 1.0;
  s.constants["delta"] = 0.5;
  const Expression f1 = ParseExpression("-(c^2/2 + delta) * x1", s);
  const Expression s2 = ParseExpression("c * x1", s);
  // Hand values at (1, 0): f = (-1, 0), sigma = (0, 1).
  EXPECT_DOUBLE_EQ(f1.Evaluate(std::vector<double>{1, 0}), -1.0);
  EXPECT_DOUBLE_EQ(s2.Evaluate(std::vector<double>{1, 0}), 1.0);
}

TEST(ExpressionTest, ErrorsCarryPosition) {
  const auto position = [](const std::string& text) -> long {
    try {
      ParseExpression(text, XY());
    } catch (const ParseError& e) {
      return static_cast<long>(e.position());
    }
    return -1;
  };
  EXPECT_EQ(position("x1 +"), 4);
  EXPECT_EQ(position("x1 + y"), 5);
  EXPECT_EQ(position("(x1"), 3);
  EXPECT_EQ(position("foo(x1)"), 0);
  EXPECT_GE(position("x1 $ 2"), 3);
  EXPECT_GE(position("min(x1)"), 0);
  EXPECT_EQ(position("x1 * x2"), -1);
}

TEST(ExpressionTest, PrintParseRoundTrip) {
  const std::vector<std::string> texts = {
      "sqrt(x1^2 + x2^2)", "-(0.5 + 0.1) * x1 / (1 + x2^2)", "min(abs(x1), exp(-x2)) - 1e-7",
      "2^-x1", "-x1^2", "max(sign(x1), step(x2 - 0.3333333333333333))", "x1 - (x2 - 1)"};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const std::string& t : texts) {
    const Expression e = ParseExpression(t, XY());
    const Expression back = ParseExpression(e.ToString(), XY());
    EXPECT_TRUE(back.StructurallyEquals(e)) << t << " -> " << e.ToString();
    for (int k = 0; k < 20; ++k) {
      const std::vector<double> v = {u(rng), u(rng)};
      const double a = e.Evaluate(v);
      const double b = back.Evaluate(v);
      if (std::isnan(a)) {
        EXPECT_TRUE(std::isnan(b));
      } else {
        EXPECT_EQ(a, b) << t;
      }
    }
  }
}

TEST(ExpressionTest, CompiledMatchesTreeEvaluation) {
  const Expression e = ParseExpression("sin(x1) * cos(x2) + sqrt(abs(x1 * x2)) - min(x1, 2 * x2)^2", XY());
  const CompiledExpression c(e);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> v = {u(rng), u(rng)};
    EXPECT_DOUBLE_EQ(c(v), e.Evaluate(v));
  }
}

// Symbolic derivatives against central differences.
TEST(ExpressionTest, DerivativesMatchFiniteDifferences) {
  const std::vector<std::string> texts = {"sqrt(x1^2 + x2^2)", "exp(x1) * sin(x2)", "x1^3 / (1 + x2^2)",
                                          "log(1 + x1^2) - cos(x1 * x2)", "x1^x2"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  const double h = 1e-6;
  for (const std::string& t : texts) {
    const Expression e = ParseExpression(t, XY());
    for (int slot = 0; slot < 2; ++slot) {
      const Expression d = e.Differentiate(slot);
      for (int k = 0; k < 10; ++k) {
        std::vector<double> v = {u(rng), u(rng)};
        std::vector<double> vp = v, vm = v;
        vp[slot] += h;
        vm[slot] -= h;
        const double fd = (e.Evaluate(vp) - e.Evaluate(vm)) / (2 * h);
        EXPECT_NEAR(d.Evaluate(v), fd, 1e-6 * (1 + std::abs(fd))) << t << " slot " << slot;
      }
    }
  }
}

TEST(ExpressionTest, SubstituteRemapsSlots) {
  const Expression e = ParseExpression("x1 + 2 * x2", XY());
  const Expression swapped = e.Substitute([](int slot, const std::string& name) {
    return Expression::Variable(1 - slot, name);
  });
  EXPECT_DOUBLE_EQ(swapped.Evaluate(std::vector<double>{1, 10}), 12.0);
}

TEST(ExpressionTest, EmptyCompiledIsZero) {
  const CompiledExpression c;
  EXPECT_TRUE(c.empty());
  EXPECT_EQ(c(std::vector<double>{}), 0.0);
}

}  // namespace
}  // namespace asclf
