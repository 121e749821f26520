#include "asclf/field_ops.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "asclf/model_file.h"

namespace asclf {
namespace {

Grid Square(double half, int nodes) {
  return Grid(VectorXd::Constant(2, -half), VectorXd::Constant(2, half), VectorXi::Constant(2, nodes));
}

CandidateFunction Cand(const std::string& text) {
  return CandidateFunction(ParseExpression(text, StateSymbols(2)), 2);
}

// Analytic oracle for f = sin(x1) exp(x2).
VectorXd SmoothGradient(const VectorXd& x) {
  return (VectorXd(2) << std::cos(x[0]) * std::exp(x[1]), std::sin(x[0]) * std::exp(x[1])).finished();
}
MatrixXd SmoothHessian(const VectorXd& x) {
  MatrixXd h(2, 2);
  h << -std::sin(x[0]), std::cos(x[0]), std::cos(x[0]), std::sin(x[0]);
  return h * std::exp(x[1]);
}

TEST(FieldOpsTest, QuadraticIsDifferentiatedExactly) {
  const Grid g = Square(1.0, 11);
  const ScalarField f = ScalarField::Sample(g, Cand("x1^2 + 3 * x1 * x2 - x2^2 + x1"));
  for (Index i = 0; i < g.size(); ++i) {
    const VectorXd x = g.Node(i);
    const FieldGradient p = Gradient(f, i);
    const FieldHessian y = Hessian(f, i);
    EXPECT_NEAR(p.p[0], 2 * x[0] + 3 * x[1] + 1, 1e-10);
    EXPECT_NEAR(p.p[1], 3 * x[0] - 2 * x[1], 1e-10);
    EXPECT_NEAR(y.y(0, 0), 2.0, 1e-8);
    EXPECT_NEAR(y.y(0, 1), 3.0, 1e-8);
    EXPECT_NEAR(y.y(1, 1), -2.0, 1e-8);
    EXPECT_EQ(p.one_sided, g.OnBoundary(i));
  }
}

TEST(FieldOpsTest, NormGradientMatchesAnalyticAwayFromOrigin) {
  const Grid g = Square(1.0, 101);
  const double h = g.max_spacing();
  const ScalarField f = ScalarField::Sample(g, Cand("sqrt(x1^2 + x2^2)"));
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> pick(10, 90);
  for (int k = 0; k < 100; ++k) {
    const Index i = g.Linear((VectorXi(2) << pick(rng), pick(rng)).finished());
    const VectorXd x = g.Node(i);
    if (x.norm() < 0.3) continue;
    const VectorXd exact = x / x.norm();
    // Truncation error of the central difference is h^2 |D^3 V| / 6 with
    // |D^3 V| <= 3 / |x|^2.
    EXPECT_LE((Gradient(f, i).p - exact).norm(), 10 * h * h / (x.norm() * x.norm()));
  }
}

// Halving h must cut the interior error by close to 4.
TEST(FieldOpsTest, SecondOrderConvergence) {
  std::vector<double> grad_err, hess_err;
  for (int nodes : {41, 81, 161}) {
    const Grid g = Square(1.0, nodes);
    const ScalarField f = ScalarField::Sample(g, Cand("sin(x1) * exp(x2)"));
    double ge = 0, he = 0;
    for (Index i = 0; i < g.size(); ++i) {
      if (g.OnBoundary(i)) continue;
      const VectorXd x = g.Node(i);
      ge = std::max(ge, (Gradient(f, i).p - SmoothGradient(x)).cwiseAbs().maxCoeff());
      he = std::max(he, (Hessian(f, i).y - SmoothHessian(x)).cwiseAbs().maxCoeff());
    }
    grad_err.push_back(ge);
    hess_err.push_back(he);
  }
  for (std::size_t k = 1; k < grad_err.size(); ++k) {
    EXPECT_GE(std::log2(grad_err[k - 1] / grad_err[k]), 1.9);
    EXPECT_GE(std::log2(hess_err[k - 1] / hess_err[k]), 1.9);
  }
}

TEST(FieldOpsTest, OneSidedFacesAreSecondOrder) {
  std::vector<double> err;
  for (int nodes : {21, 41}) {
    const Grid g = Square(1.0, nodes);
    const ScalarField f = ScalarField::Sample(g, Cand("sin(x1) * exp(x2)"));
    double e = 0;
    for (Index i = 0; i < g.size(); ++i) {
      if (!g.OnBoundary(i)) continue;
      e = std::max(e, (Gradient(f, i).p - SmoothGradient(g.Node(i))).cwiseAbs().maxCoeff());
    }
    err.push_back(e);
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.9);
}

TEST(FieldOpsTest, CandidateAndFieldJetsAgree) {
  const Grid g = Square(1.0, 41);
  const CandidateFunction c = Cand("sin(x1) * exp(x2)");
  const ScalarField f = ScalarField::Sample(g, c);
  const CandidateJets cj(c);
  const FieldJets fj(f);
  const double h = g.max_spacing();
  for (Index i = 0; i < g.size(); i += 37) {
    if (g.OnBoundary(i)) continue;
    const Jet a = cj.JetAt(g, i);
    const Jet b = fj.JetAt(g, i);
    EXPECT_DOUBLE_EQ(a.value, b.value);
    EXPECT_LE((a.gradient - b.gradient).norm(), 10 * h * h);
    EXPECT_LE((a.hessian - b.hessian).norm(), 10 * h * h);
  }
  EXPECT_THROW(fj.JetAt(Square(1.0, 21), 0), PreconditionError);
}

TEST(FieldOpsTest, ComposedJetsFollowTheChainRule) {
  const Grid g = Square(1.0, 21);
  const CandidateFunction v = Cand("x1^2 + 2 * x2^2");
  const CandidateJets vj(v);
  SymbolTable t;
  t.variables["t"] = 0;
  const ComposedJets composed(vj, ParseExpression("exp(t) - 1", t));
  // Oracle: the candidate exp(V) - 1 differentiated symbolically.
  const CandidateFunction oracle = Cand("exp(x1^2 + 2 * x2^2) - 1");
  const CandidateJets direct(oracle);
  for (Index i = 0; i < g.size(); i += 13) {
    const Jet a = composed.JetAt(g, i);
    const Jet b = direct.JetAt(g, i);
    EXPECT_NEAR(a.value, b.value, 1e-12 * (1 + std::abs(b.value)));
    EXPECT_LE((a.gradient - b.gradient).norm(), 1e-12 * (1 + b.gradient.norm()));
    EXPECT_LE((a.hessian - b.hessian).norm(), 1e-12 * (1 + b.hessian.norm()));
  }
  EXPECT_DOUBLE_EQ(composed.Derivative(0.0), 1.0);
}

TEST(FieldOpsTest, CircleLevelSetNormals) {
  const Grid g = Square(1.0, 81);
  const double h = g.max_spacing();
  const ScalarField f = ScalarField::Sample(g, Cand("sqrt(x1^2 + x2^2)"));
  const LevelSet set = ExtractLevelSet(FieldJets(f), g, 0.5);
  ASSERT_FALSE(set.nodes.empty());
  EXPECT_FALSE(set.touches_grid_edge);
  EXPECT_EQ(set.inconsistent_normals, 0);
  for (std::size_t k = 0; k < set.nodes.size(); ++k) {
    const VectorXd x = g.Node(set.nodes[k]);
    EXPECT_LE(x.norm(), 0.5);
    EXPECT_GT(x.norm(), 0.5 - h - 1e-12);
    EXPECT_LE((set.normal[k] + x / x.norm()).norm(), 2 * h);
    // Curvature term of a circle of radius |x|: -(I - n n^T) / |x|.
    const VectorXd t = (VectorXd(2) << -x[1], x[0]).finished() / x.norm();
    EXPECT_NEAR(t.dot(set.curvature[k] * t), -1.0 / x.norm(), 0.1);
  }
}

TEST(FieldOpsTest, EmptyLevelSetThrows) {
  const Grid g = Square(1.0, 21);
  const CandidateFunction v = Cand("sqrt(x1^2 + x2^2)");
  EXPECT_THROW(ExtractLevelSet(CandidateJets(v), g, 5.0), PreconditionError);
  EXPECT_THROW(ExtractLevelSet(CandidateJets(v), g, -1.0), PreconditionError);
}

TEST(FieldOpsTest, LevelSetTouchingTheEdgeIsFlagged) {
  const Grid g = Square(1.0, 21);
  const CandidateFunction v = Cand("x1");
  const LevelSet set = ExtractLevelSet(CandidateJets(v), g, 0.05);
  EXPECT_TRUE(set.touches_grid_edge);
}

}  // namespace
}  // namespace asclf
