#include "asclf/verifier.h"

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "asclf/model_file.h"

namespace asclf {
namespace {

namespace fs = std::filesystem;

ModelFile Load(const std::string& name) { return LoadModelFile(fs::path(ASCLF_MODELS_DIR) / name); }

ControlledDiffusion Model(const std::string& dims, const std::string& dynamics,
                          const std::string& controls = "") {
  return ParseModelFile("[dimensions]\n" + dims + "\n" + controls + "[dynamics]\n" + dynamics + "\n").model;
}

CandidateFunction Cand(const std::string& text, int n) {
  return CandidateFunction(ParseExpression(text, StateSymbols(n)), n);
}

Grid Line(int nodes) {
  return Grid(VectorXd::Constant(1, -1), VectorXd::Constant(1, 1), VectorXi::Constant(1, nodes));
}
Grid Square(double half, int nodes) {
  return Grid(VectorXd::Constant(2, -half), VectorXd::Constant(2, half), VectorXi::Constant(2, nodes));
}

TEST(TangentialControlsTest, RotationalNoiseIsTangentToRadius) {
  const ModelFile rot = Load("rotational.model");
  const VectorXd x = (VectorXd(2) << 0.3, -0.7).finished();
  EXPECT_EQ(TangentialControls(rot.model, x, x, 1e-6), std::vector<int>{0});
}

TEST(TangentialControlsTest, SelectsControlsWithZeroFirstRow) {
  const ControlledDiffusion m = Model("N = 2\nM = 1", "f1 = 0\nf2 = 0\ns1_1 = u\ns2_1 = 1 - u",
                                     "[controls]\nparams = u\nvertical = 0\nhorizontal = 1\nmixed = 0.5\n");
  const VectorXd x = VectorXd::Zero(2);
  EXPECT_EQ(TangentialControls(m, x, (VectorXd(2) << 1, 0).finished(), 1e-6), std::vector<int>{0});
  EXPECT_EQ(TangentialControls(m, x, (VectorXd(2) << 0, 1).finished(), 1e-6), std::vector<int>{1});
}

TEST(TangentialControlsTest, ZeroDiffusionAdmitsEverything) {
  const ModelFile two = Load("two_control.model");
  EXPECT_EQ(TangentialControls(two.model, VectorXd::Ones(1), VectorXd::Ones(1), 1e-6),
            (std::vector<int>{0, 1}));
}

TEST(HamiltonianTest, RotationalClosedForm) {
  const ModelFile rot = Load("rotational.model");
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 100; ++k) {
    const VectorXd x = (VectorXd(2) << u(rng), u(rng)).finished();
    const double r = x.norm();
    const VectorXd p = x / r;
    const MatrixXd y = (MatrixXd::Identity(2, 2) - p * p.transpose()) / r;
    const HamiltonianValue h = EvaluateHamiltonian(rot.model, x, p, y, 1e-6);
    // -p.f = (c^2/2 + delta) r and tr[aY] = c^2 r / 2, so m = delta r.
    EXPECT_NEAR(h.value, 0.5 * r, 1e-14);
    EXPECT_EQ(h.witness, 0);
  }
}

TEST(HamiltonianTest, TiesGoToLowestIndex) {
  const ControlledDiffusion m =
      Model("N = 1\nM = 1", "f1 = -x1", "[controls]\nparams = u\na = 0\nb = 0\n");
  const HamiltonianValue h = EvaluateHamiltonian(m, VectorXd::Ones(1), VectorXd::Ones(1), MatrixXd::Zero(1, 1), 1e-6);
  EXPECT_EQ(h.witness, 0);
}

// Replacing f by -f changes every margin by 2 p.f.
TEST(HamiltonianTest, MarginAntiSymmetry) {
  const ControlledDiffusion plus = Model("N = 2\nM = 1", "f1 = x1 - x2^2\nf2 = sin(x1)\ns1_1 = -x2\ns2_1 = x1");
  const ControlledDiffusion minus =
      Model("N = 2\nM = 1", "f1 = -(x1 - x2^2)\nf2 = -sin(x1)\ns1_1 = -x2\ns2_1 = x1");
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 100; ++k) {
    const VectorXd x = (VectorXd(2) << u(rng), u(rng)).finished();
    const VectorXd p = u(rng) > 0 ? x : -2.0 * x;
    MatrixXd y(2, 2);
    y << u(rng), u(rng), 0, u(rng);
    y(1, 0) = y(0, 1);
    const HamiltonianValue a = EvaluateHamiltonian(plus, x, p, y, 1e-6);
    const HamiltonianValue b = EvaluateHamiltonian(minus, x, p, y, 1e-6);
    EXPECT_NEAR(b.value, a.value + 2.0 * p.dot(plus.Drift(x, 0)), 1e-13);
  }
}

TEST(HamiltonianTest, EmptyTangentialSetIsMinusInfinity) {
  const ControlledDiffusion radial = Model("N = 2\nM = 1", "f1 = -x1\nf2 = -x2\ns1_1 = x1\ns2_1 = x2");
  const VectorXd x = (VectorXd(2) << 0.5, 0.5).finished();
  const HamiltonianValue h = EvaluateHamiltonian(radial, x, x, MatrixXd::Zero(2, 2), 1e-6);
  EXPECT_EQ(h.witness, -1);
  EXPECT_TRUE(std::isinf(h.value) && h.value < 0);
}

TEST(SupersolutionTest, OneDimensionalStable) {
  const ModelFile m = Load("linear_stable.model");
  const Grid g = Line(41);
  const VerificationReport r = CheckSupersolution(m.model, Cand("x1^2", 1), g, nullptr);
  EXPECT_TRUE(r.all_pass());
  for (const NodeVerdict& n : r.nodes) {
    EXPECT_NEAR(n.margin, 2 * n.x[0] * n.x[0], 1e-14);
    EXPECT_EQ(n.witness, 0);
  }
}

TEST(SupersolutionTest, OneDimensionalUnstableFailsEverywhere) {
  const ModelFile m = Load("linear_unstable.model");
  const Grid g = Line(41);
  VerifierOptions exact;
  exact.tol = 1e-12;
  const VerificationReport r = CheckSupersolution(m.model, Cand("x1^2", 1), g, nullptr, exact);
  EXPECT_EQ(r.summary.failed, r.summary.checked);
  for (const NodeVerdict& n : r.nodes) EXPECT_NEAR(n.margin, -2 * n.x[0] * n.x[0], 1e-14);
  EXPECT_EQ(static_cast<int>(r.summary.failing_nodes.size()), r.summary.failed);
}

TEST(SupersolutionTest, RotationalPassesWithZeroMargin) {
  const ModelFile m = Load("rotational.model");
  const Grid g = Square(1.0, 51);
  const GaugeFunction l = GaugeFunction::OfState(*m.gauge, 2);
  const VerificationReport r = CheckSupersolution(m.model, *m.candidate, g, &l);
  EXPECT_TRUE(r.all_pass());
  int expected = 0;
  for (Index i = 0; i < g.size(); ++i) expected += g.Node(i).norm() > g.rho();
  EXPECT_EQ(r.summary.checked, expected);
  EXPECT_EQ(r.summary.excluded, static_cast<int>(g.size()) - expected);
  for (const NodeVerdict& n : r.nodes) {
    EXPECT_NEAR(n.margin, 0.0, 1e-12);
    EXPECT_EQ(n.witness, 0);
    EXPECT_LE(n.tangency_residual, 1e-12);
  }
}

TEST(SupersolutionTest, NoTangentialControlFailsWithFlag) {
  const ControlledDiffusion radial = Model("N = 2\nM = 1", "f1 = -x1\nf2 = -x2\ns1_1 = x1\ns2_1 = x2");
  const VerificationReport r = CheckSupersolution(radial, Cand("sqrt(x1^2 + x2^2)", 2), Square(1.0, 11), nullptr);
  EXPECT_EQ(r.summary.passed, 0);
  EXPECT_GT(r.summary.failed, 0);
  for (const NodeVerdict& n : r.nodes) {
    EXPECT_EQ(n.witness, -1);
    EXPECT_NE(n.flag.find("no tangential control"), std::string::npos);
  }
}

TEST(SupersolutionTest, NonFiniteNodesAreCountedSeparately) {
  const ModelFile m = Load("linear_stable.model");
  VerifierOptions o;
  o.rho = 0.0;
  const VerificationReport r = CheckSupersolution(m.model, Cand("log(x1 + 1)", 1), Line(21), nullptr, o);
  EXPECT_EQ(r.summary.nonfinite, 1);
  EXPECT_EQ(r.summary.excluded, 1);
  EXPECT_EQ(r.summary.checked + r.summary.nonfinite + r.summary.excluded, 21);
}

TEST(SupersolutionTest, WorkerCountDoesNotChangeTheReport) {
  const ModelFile m = Load("rotational.model");
  const Grid g = Square(1.0, 41);
  VerifierOptions one, four;
  four.workers = 4;
  const VerificationReport a = CheckSupersolution(m.model, Cand("x1^2 + x2^2 + x1", 2), g, nullptr, one);
  const VerificationReport b = CheckSupersolution(m.model, Cand("x1^2 + x2^2 + x1", 2), g, nullptr, four);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    EXPECT_EQ(a.nodes[k].margin, b.nodes[k].margin);
    EXPECT_EQ(a.nodes[k].pass, b.nodes[k].pass);
  }
  EXPECT_EQ(a.summary.failing_nodes, b.summary.failing_nodes);
}

TEST(RadialCheckTest, Examples) {
  VerifierOptions exact;
  exact.tol = 1e-12;
  EXPECT_TRUE(RadialSufficientCheck(Load("rotational.model").model, Square(1.0, 21), exact).all_pass());
  const VerificationReport u = RadialSufficientCheck(Load("unstable.model").model, Square(1.0, 21), exact);
  EXPECT_EQ(u.summary.passed, 0);
  const ControlledDiffusion radial = Model("N = 2\nM = 1", "f1 = -x1\nf2 = -x2\ns1_1 = x1\ns2_1 = x2");
  EXPECT_EQ(RadialSufficientCheck(radial, Square(1.0, 21), exact).summary.passed, 0);
  // Margin oracle on the rotational model: -(f.x + tr a) = delta |x|^2.
  for (const NodeVerdict& n : RadialSufficientCheck(Load("rotational.model").model, Square(1.0, 21)).nodes) {
    EXPECT_NEAR(n.margin, 0.5 * n.x.squaredNorm(), 1e-14);
  }
}

TEST(InvarianceTest, RandomInstancesOnRotationalModel) {
  const ModelFile rot = Load("rotational.model");
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> lam(0.1, 10);
  std::uniform_real_distribution<double> mu(-10, 10);
  for (int k = 0; k < 500; ++k) {
    const VectorXd x = (VectorXd(2) << u(rng), u(rng)).finished();
    MatrixXd y(2, 2);
    y << u(rng), u(rng), 0, u(rng);
    y(1, 0) = y(0, 1);
    const double l = lam(rng);
    const InvarianceResult r = CheckGeometricInvariance(rot.model, x, x, y, l, mu(rng), 1e-6);
    EXPECT_FALSE(r.empty1 || r.empty2);
    EXPECT_LE(r.residual, 1e-9 * (1 + std::abs(r.f1)));
    // Verdict invariance for any threshold scaled with lambda.
    EXPECT_EQ(r.f1 >= 0, r.f2 >= 0);
  }
}

TEST(InvarianceTest, IdentityScalingIsExact) {
  const ModelFile rot = Load("rotational.model");
  const VectorXd x = (VectorXd(2) << 0.2, 0.9).finished();
  const InvarianceResult r = CheckGeometricInvariance(rot.model, x, x, MatrixXd::Identity(2, 2), 1.0, 0.0, 1e-6);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(InvarianceTest, ZeroDiffusionForAnyMu) {
  const ModelFile u = Load("unstable.model");
  const VectorXd x = (VectorXd(2) << 0.2, -0.4).finished();
  const VectorXd p = (VectorXd(2) << 1.0, 3.0).finished();
  for (double mu : {-10.0, 0.5, 7.0}) {
    const InvarianceResult r = CheckGeometricInvariance(u.model, x, p, MatrixXd::Identity(2, 2), 2.5, mu, 1e-6);
    EXPECT_LE(r.residual, 1e-12);
  }
}

TEST(ChangeOfUnknownTest, RotationalVerdictsAgree) {
  const ModelFile rot = Load("rotational.model");
  const CandidateJets v(*rot.candidate);
  SymbolTable t;
  t.variables["t"] = 0;
  for (const char* phi : {"t^2", "exp(t) - 1", "2 * t", "t"}) {
    const ChangeOfUnknownResult r = CheckChangeOfUnknown(rot.model, v, ParseExpression(phi, t), Square(1.0, 41));
    EXPECT_EQ(r.disagree, 0) << phi;
    EXPECT_TRUE(r.original.all_pass());
    EXPECT_TRUE(r.composed.all_pass());
  }
  // phi = t gives identical reports.
  const ChangeOfUnknownResult same = CheckChangeOfUnknown(rot.model, v, ParseExpression("t", t), Square(1.0, 21));
  for (std::size_t k = 0; k < same.original.nodes.size(); ++k) {
    EXPECT_EQ(same.original.nodes[k].margin, same.composed.nodes[k].margin);
  }
}

TEST(ChangeOfUnknownTest, OneDimensionalExponential) {
  const ModelFile m = Load("linear_stable.model");
  const CandidateFunction v = Cand("x1^2", 1);
  SymbolTable t;
  t.variables["t"] = 0;
  const ChangeOfUnknownResult r = CheckChangeOfUnknown(m.model, CandidateJets(v), ParseExpression("exp(t)", t), Line(41));
  EXPECT_TRUE(r.original.all_pass());
  EXPECT_TRUE(r.composed.all_pass());
  // Hand chain rule: margin of e^V is e^V * 2x^2.
  for (const NodeVerdict& n : r.composed.nodes) {
    EXPECT_NEAR(n.margin, std::exp(n.x[0] * n.x[0]) * 2 * n.x[0] * n.x[0], 1e-12);
  }
}

TEST(ChangeOfUnknownTest, DecreasingPhiIsRejected) {
  const ModelFile rot = Load("rotational.model");
  SymbolTable t;
  t.variables["t"] = 0;
  EXPECT_THROW(CheckChangeOfUnknown(rot.model, CandidateJets(*rot.candidate), ParseExpression("-t", t), Square(1.0, 21)),
               PreconditionError);
  EXPECT_THROW(CheckChangeOfUnknown(rot.model, CandidateJets(*rot.candidate), ParseExpression("(t - 0.5)^2", t),
                                    Square(1.0, 21)),
               PreconditionError);
}

TEST(ViabilityTest, Examples) {
  const CandidateFunction v = Cand("sqrt(x1^2 + x2^2)", 2);
  const Grid g = Square(1.0, 61);
  const VerificationReport rot = CheckViabilityBoundary(Load("rotational.model").model, CandidateJets(v), g, 0.5);
  EXPECT_TRUE(rot.all_pass());
  EXPECT_EQ(rot.summary.inconclusive, 0);
  const VerificationReport out = CheckViabilityBoundary(Load("unstable.model").model, CandidateJets(v), g, 0.5);
  EXPECT_EQ(out.summary.passed, 0);
  EXPECT_EQ(out.summary.failed, static_cast<int>(out.nodes.size()));
  const VerificationReport zero = CheckViabilityBoundary(Load("zero.model").model, CandidateJets(v), g, 0.5);
  EXPECT_TRUE(zero.all_pass());
}

TEST(ViabilityTest, GridEdgeNodesAreInconclusive) {
  const CandidateFunction v = Cand("sqrt(x1^2 + x2^2)", 2);
  const VerificationReport r =
      CheckViabilityBoundary(Load("rotational.model").model, CandidateJets(v), Square(1.0, 21), 1.0);
  EXPECT_GT(r.summary.inconclusive, 0);
}

// A candidate passing the strict inequality near {V = mu} makes the
// boundary check pass.
TEST(ViabilityTest, SupersolutionBandImpliesViability) {
  const ModelFile rot = Load("rotational.model");
  const CandidateFunction v = Cand("x1^2 + x2^2", 2);
  const Grid g = Square(1.0, 41);
  const VerificationReport sup = CheckSupersolution(rot.model, v, g, nullptr);
  ASSERT_TRUE(sup.all_pass());
  for (double level : {0.1, 0.3, 0.6}) {
    EXPECT_TRUE(CheckViabilityBoundary(rot.model, CandidateJets(v), g, level).all_pass()) << level;
  }
}

TEST(SetLyapunovTest, OriginTargetReducesToPointCase) {
  const ModelFile rot = Load("rotational.model");
  const GaugeFunction id = GaugeFunction::Radial(ParseRadialExpression("r"));
  const GaugeFunction l = GaugeFunction::OfState(*rot.gauge, 2);
  const VerificationReport r = CheckSetLyapunov(rot.model, CandidateJets(*rot.candidate),
                                                ParseExpression("sqrt(x1^2 + x2^2)", StateSymbols(2)), id, id,
                                                Square(1.0, 41), &l);
  EXPECT_TRUE(r.all_pass());
}

TEST(SetLyapunovTest, SandwichViolation) {
  const ModelFile rot = Load("rotational.model");
  const GaugeFunction id = GaugeFunction::Radial(ParseRadialExpression("r"));
  const CandidateFunction v = Cand("2 * sqrt(x1^2 + x2^2)", 2);
  const VerificationReport r = CheckSetLyapunov(rot.model, CandidateJets(v),
                                                ParseExpression("sqrt(x1^2 + x2^2)", StateSymbols(2)), id, id,
                                                Square(1.0, 21), nullptr);
  EXPECT_FALSE(r.all_pass());
  for (const NodeVerdict& n : r.nodes) {
    if (n.x.norm() > 0.3) EXPECT_NE(n.flag.find("sandwich"), std::string::npos);
  }
}

TEST(SetLyapunovTest, CircleTarget) {
  const ModelFile c = Load("circle_target.model");
  const GaugeFunction l = GaugeFunction::OfState(*c.gauge, 2);
  const VerificationReport r =
      CheckSetLyapunov(c.model, CandidateJets(*c.candidate), c.target->distance,
                       GaugeFunction::Radial(c.target->gamma1), GaugeFunction::Radial(c.target->gamma2),
                       Square(1.5, 60), &l);
  EXPECT_TRUE(r.all_pass());
  ASSERT_TRUE(r.boundary_min_value.has_value());
  EXPECT_GT(*r.boundary_min_value, 0.0);
}

TEST(SetLyapunovTest, NonMonotoneGammaIsRejected) {
  const ModelFile rot = Load("rotational.model");
  const GaugeFunction id = GaugeFunction::Radial(ParseRadialExpression("r"));
  const GaugeFunction bump = GaugeFunction::Radial(ParseRadialExpression("r * exp(-r)"));
  EXPECT_THROW(CheckSetLyapunov(rot.model, CandidateJets(*rot.candidate),
                                ParseExpression("sqrt(x1^2 + x2^2)", StateSymbols(2)), bump, id, Square(1.0, 11),
                                nullptr),
               PreconditionError);
}

}  // namespace
}  // namespace asclf
