#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"
#include "asclf/field_ops.h"
#include "asclf/gauge.h"
#include "asclf/grid.h"
#include "asclf/model.h"

namespace asclf {

/// Per-node result. `checked` is false for nodes whose derivatives were not
/// finite; such nodes count in `nonfinite` and take no part in pass/fail.
struct NodeVerdict {
  Index node = 0;
  VectorXd x;
  bool checked = true;
  bool pass = false;
  /// Edge-of-grid level-set nodes: no verdict possible.
  bool inconclusive = false;
  double margin = 0.0;
  double tol = 0.0;
  /// Control attaining the max; -1 when there is none.
  int witness = -1;
  /// |sigma^T p| under the witness (or the least over controls if none).
  double tangency_residual = 0.0;
  std::string flag;
};

struct VerificationSummary {
  int checked = 0;
  int passed = 0;
  int failed = 0;
  int nonfinite = 0;
  int inconclusive = 0;
  /// Nodes skipped by the origin exclusion.
  int excluded = 0;
  /// Nodes whose analytic Hessian disagrees with the difference quotient.
  int nonsmooth = 0;
  double worst_margin = 0.0;
  std::vector<Index> failing_nodes;
};

struct VerificationReport {
  std::string name;
  std::vector<NodeVerdict> nodes;
  VerificationSummary summary;
  /// Smallest value on the grid's outer face. Sublevel sets below it stay
  /// inside the grid.
  std::optional<double> boundary_min_value;

  bool all_pass() const { return summary.failed == 0 && summary.checked > 0; }
  /// Recomputes the summary from `nodes`.
  void Summarize();
};

struct VerifierOptions {
  /// Relative tangency slack: |sigma^T p| <= eps_tan |p| max(1, ||sigma||_F).
  double eps_tan = 1e-6;
  /// Absolute verdict tolerance; unset selects 10 h^2 times the local scale
  /// 1 + |p| max|f| + ||Y||_F max||a||_F.
  std::optional<double> tol;
  /// Origin exclusion radius; unset uses the grid's rho.
  std::optional<double> rho;
  int workers = 1;
  /// Compare analytic and difference Hessians to flag nonsmooth nodes.
  bool crosscheck = true;
  double nonsmooth_threshold = 1e-3;
};

/// Controls passing the relative tangency test at (x, p).
std::vector<int> TangentialControls(const ControlledDiffusion& model,
                                    const Eigen::Ref<const VectorXd>& x,
                                    const Eigen::Ref<const VectorXd>& p, double eps_tan);

/// max over tangential controls of -p.f - tr[a Y]. `value` is -inf with
/// witness -1 when no control is tangential.
struct HamiltonianValue {
  double value = 0.0;
  int witness = -1;
  double tangency_residual = 0.0;
  /// max |f| and max ||a||_F over all controls at x.
  double drift_scale = 0.0;
  double diffusion_scale = 0.0;
};
HamiltonianValue EvaluateHamiltonian(const ControlledDiffusion& model,
                                     const Eigen::Ref<const VectorXd>& x,
                                     const Eigen::Ref<const VectorXd>& p,
                                     const Eigen::Ref<const MatrixXd>& y, double eps_tan);

/// Checks max_alpha m(alpha) >= l(x) - tol at every node outside |x| <= rho.
/// `l` may be null (l = 0).
VerificationReport CheckSupersolution(const ControlledDiffusion& model, const JetSource& v,
                                      const Grid& grid, const GaugeFunction* l,
                                      const VerifierOptions& options = {});
VerificationReport CheckSupersolution(const ControlledDiffusion& model,
                                      const CandidateFunction& v, const Grid& grid,
                                      const GaugeFunction* l, const VerifierOptions& options = {});

/// Some control with sigma^T x = 0 and f.x + tr a <= tol. Margin is
/// -(f.x + tr a) of the best tangential control.
VerificationReport RadialSufficientCheck(const ControlledDiffusion& model, const Grid& grid,
                                         const VerifierOptions& options = {});

struct InvarianceResult {
  double f1 = 0.0;
  double f2 = 0.0;
  /// |F2 - lambda F1|; zero when both sides are empty.
  double residual = 0.0;
  bool empty1 = false;
  bool empty2 = false;
};
/// Compares F(x, lambda p, lambda Y + mu p p^T) with lambda F(x, p, Y).
InvarianceResult CheckGeometricInvariance(const ControlledDiffusion& model,
                                          const Eigen::Ref<const VectorXd>& x,
                                          const Eigen::Ref<const VectorXd>& p,
                                          const Eigen::Ref<const MatrixXd>& y, double lambda,
                                          double mu, double eps_tan);

struct ChangeOfUnknownResult {
  VerificationReport original;
  VerificationReport composed;
  int agree = 0;
  int disagree = 0;
  /// Disagreements where either margin lies within its tolerance band.
  int disagree_near_boundary = 0;
  double agreement() const {
    const int n = agree + disagree;
    return n == 0 ? 1.0 : static_cast<double>(agree) / n;
  }
};
/// Runs the supersolution check on V and on phi(V) (phi an expression in t,
/// slot 0) with l = 0. Throws PreconditionError when phi' <= 0 somewhere on the
/// range of V over the grid.
ChangeOfUnknownResult CheckChangeOfUnknown(const ControlledDiffusion& model, const JetSource& v,
                                           const Expression& phi, const Grid& grid,
                                           const VerifierOptions& options = {});

/// Nagumo-type test on the boundary of {V <= level}: some tangential control
/// with f.p + tr[a Y] >= -tol, where (p, Y) are the interior normal and the
/// matching curvature term. Nodes on the grid edge are inconclusive.
VerificationReport CheckViabilityBoundary(const ControlledDiffusion& model, const JetSource& v,
                                          const Grid& grid, double level,
                                          const VerifierOptions& options = {});

/// Sandwich gamma2(d(x)) <= V(x) <= gamma1(d(x)) everywhere and the
/// supersolution inequality where d(x) > rho. Both gammas must be monotone
/// radial gauges vanishing at 0.
VerificationReport CheckSetLyapunov(const ControlledDiffusion& model, const JetSource& v,
                                    const Expression& distance, const GaugeFunction& gamma1,
                                    const GaugeFunction& gamma2, const Grid& grid,
                                    const GaugeFunction* l, const VerifierOptions& options = {});

}  // namespace asclf
