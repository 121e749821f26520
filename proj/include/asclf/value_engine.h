#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"
#include "asclf/gauge.h"
#include "asclf/grid.h"
#include "asclf/model.h"

namespace asclf {

/// Discrete-time worst-case (or averaged) dynamic programming scheme.
///
/// A step from x under control a and noise increment w is
/// x + f(x, a) dt + sigma(x, a) w. Increments stand in for dB over one step.
struct RobustScheme {
  /// <= 0 selects DefaultTimeStep.
  double dt = 0.0;
  /// Empty selects DefaultIncrements(M, dt).
  std::vector<VectorXd> increments;
  /// Saturation level; off-grid states take this value.
  double cap = 1.0;
  int max_iter = 100000;
  /// Stop once the sup-norm change of one sweep drops below this.
  double residual_tol = 1e-7;
  int workers = 1;

  /// Copy with dt and increments filled in. Throws PreconditionError on
  /// dt <= 0 after defaulting, cap <= 0, an empty or asymmetric increment set.
  RobustScheme Resolved(const ControlledDiffusion& model, const Grid& grid) const;
};

/// {0} plus {+-sqrt(dt) e_j} for j < M.
std::vector<VectorXd> DefaultIncrements(int noise_dim, double dt);
/// h_min / (2 max|f| + 1), max over grid nodes and controls.
double DefaultTimeStep(const ControlledDiffusion& model, const Grid& grid);

/// x + f(x, a) dt + sigma(x, a) w.
VectorXd Step(const ControlledDiffusion& model, const Eigen::Ref<const VectorXd>& x, int control,
              const Eigen::Ref<const VectorXd>& w, double dt);

/// A converged (or abandoned) value iteration.
struct ValueRun {
  ValueRun(ScalarField f, RobustScheme s) : field(std::move(f)), scheme(std::move(s)) {}

  ScalarField field;
  RobustScheme scheme;
  std::vector<double> residual_history;
  bool converged = false;
  /// Every sweep was pointwise >= the previous one (up to 1e-12 relative).
  bool monotone = true;
  /// Largest decrease seen between consecutive sweeps.
  double worst_decrease = 0.0;
  int iterations() const { return static_cast<int>(residual_history.size()); }
};

/// Running cost for the sup-value; defaults to |x|.
using StateCost = std::function<double(const Eigen::Ref<const VectorXd>&)>;

/// Fixed point of V <- min(cap, max(c(x), min_a max_w V(step))), started at
/// min(c(x), cap). Throws NonFiniteError if a NaN appears.
ValueRun WorstCaseSupValue(const ControlledDiffusion& model, const Grid& grid,
                           const RobustScheme& scheme, const StateCost& cost = {});

/// Fixed point of V <- min(cap, min_a max_w [l(x) dt + V(step)]) with V = 0
/// on |x| <= rho, started at 0.
ValueRun WorstCaseIntegralValue(const ControlledDiffusion& model, const Grid& grid,
                                const GaugeFunction& l, const RobustScheme& scheme);

struct DiscountedResult {
  explicit DiscountedResult(ValueRun r) : run(std::move(r)) {}

  ValueRun run;
  /// Nodes with W <= theta.
  std::vector<Index> prop_set;
  std::vector<bool> in_prop_set;
};

/// Averaged iteration W <- min_a [c_K(|x|) dt + exp(-lambda dt) mean_w W(step)]
/// with c_K(s) = max(0, s - K). Off-grid states take c_K(|y|) / lambda.
/// `scheme.cap` is unused. Throws PreconditionError unless lambda > 0 and
/// theta > 0.
DiscountedResult DiscountedValueAndPropSet(const ControlledDiffusion& model, const Grid& grid,
                                           double k_radius, double lambda, double theta,
                                           const RobustScheme& scheme);

/// One control index per node.
struct FeedbackMap {
  Grid grid;
  std::vector<int> control;
  std::string provenance;

  /// Nearest-node lookup, clamped to the grid.
  int At(const Eigen::Ref<const VectorXd>& x) const { return control[grid.NearestNode(x)]; }
};

/// argmin_a max_w V(step) per node, lowest index on ties.
FeedbackMap SynthesizeFeedback(const ControlledDiffusion& model, const ScalarField& value,
                               const RobustScheme& scheme);

/// The model in dimension N + 1 with drift (f, l(x)) and diffusion (sigma, 0).
/// `l` is an expression in x_1..x_N.
ControlledDiffusion ExtendedSystem(const ControlledDiffusion& model, const Expression& l);

}  // namespace asclf
