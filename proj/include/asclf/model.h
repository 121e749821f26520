#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"

namespace asclf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Inconsistent sizes between declared dimensions and supplied data.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A function value or derivative that came out as NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated operation precondition (bad tolerance, non-monotone gauge, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box; the declared domain of a model.
struct Box {
  VectorXd lower;
  VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool Contains(const Eigen::Ref<const VectorXd>& x) const;
  double Diameter() const { return (upper - lower).norm(); }
};

/// One element of the finite control set. `params` binds the control
/// parameter symbols declared in the model file, in declaration order.
struct Control {
  std::string label;
  VectorXd params;
};

/// dX = f(X, a) dt + sigma(X, a) dB with a ranging over a finite list.
///
/// Expressions are over slots [x_1..x_N, u_1..u_P] where u are the control
/// parameters. A drift/diffusion entry may be overridden per control.
/// Instances are immutable once built; evaluation is thread safe.
class ControlledDiffusion {
 public:
  struct Spec {
    int state_dim = 0;
    int noise_dim = 0;
    std::vector<std::string> param_names;
    std::vector<Control> controls;
    /// drift[c][i]: i-th drift component under control c.
    std::vector<std::vector<Expression>> drift;
    /// diffusion[c][i * M + j]: sigma_ij under control c.
    std::vector<std::vector<Expression>> diffusion;
    std::optional<Box> domain;
  };

  explicit ControlledDiffusion(Spec spec);

  int state_dim() const { return spec_.state_dim; }
  int noise_dim() const { return spec_.noise_dim; }
  int num_controls() const { return static_cast<int>(spec_.controls.size()); }
  const std::vector<Control>& controls() const { return spec_.controls; }
  const std::vector<std::string>& param_names() const { return spec_.param_names; }
  const std::optional<Box>& domain() const { return spec_.domain; }
  const Spec& spec() const { return spec_; }

  const Expression& drift_expression(int control, int i) const { return spec_.drift[control][i]; }
  const Expression& diffusion_expression(int control, int i, int j) const {
    return spec_.diffusion[control][i * spec_.noise_dim + j];
  }

  void Drift(const Eigen::Ref<const VectorXd>& x, int control, Eigen::Ref<VectorXd> out) const;
  VectorXd Drift(const Eigen::Ref<const VectorXd>& x, int control) const;
  void Diffusion(const Eigen::Ref<const VectorXd>& x, int control, Eigen::Ref<MatrixXd> out) const;
  MatrixXd Diffusion(const Eigen::Ref<const VectorXd>& x, int control) const;

  std::optional<double> lipschitz_estimate() const { return lipschitz_estimate_; }
  void set_lipschitz_estimate(double c) { lipschitz_estimate_ = c; }

 private:
  void CheckControl(int control) const;
  template <typename Fn>
  void WithSlots(const Eigen::Ref<const VectorXd>& x, int control, Fn&& fn) const;

  Spec spec_;
  std::vector<std::vector<CompiledExpression>> drift_code_;
  std::vector<std::vector<CompiledExpression>> diffusion_code_;
  std::vector<std::vector<bool>> diffusion_zero_;
  std::optional<double> lipschitz_estimate_;
};

/// a(x, a) = sigma sigma^T / 2, explicitly symmetrized.
MatrixXd EvalA(const ControlledDiffusion& model, const Eigen::Ref<const VectorXd>& x, int control);

struct EquilibriumCheck {
  bool found = false;
  int witness = -1;
  /// max(|f|, ||sigma||_F) at the witness, or the smallest over all controls.
  double residual = 0.0;
};

/// First control making both drift and diffusion vanish at x0 within tol.
EquilibriumCheck CheckControlledEquilibrium(const ControlledDiffusion& model,
                                            const Eigen::Ref<const VectorXd>& x0, double tol);

/// Largest (|f(x)-f(y)| + ||sigma(x)-sigma(y)||_F) / |x-y| over uniformly
/// sampled pairs in the domain box. Diagnostic only.
double CheckLipschitzSample(const ControlledDiffusion& model, int n_pairs, std::uint64_t seed);

enum class DerivativeMode { kAnalytic, kCentralDifference };

/// Value, gradient and Hessian at one point.
struct Jet {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
  bool finite = true;
  bool one_sided = false;
};

/// Scalar function of the state given as an expression over x_1..x_N, with
/// analytic (symbolic) or central-difference derivatives.
class CandidateFunction {
 public:
  CandidateFunction(Expression expression, int state_dim,
                    DerivativeMode mode = DerivativeMode::kAnalytic, double fd_step = 1e-4);

  int state_dim() const { return state_dim_; }
  const Expression& expression() const { return expression_; }
  DerivativeMode mode() const { return mode_; }
  double fd_step() const { return fd_step_; }

  /// Throws NonFiniteError on NaN/inf.
  double Value(const Eigen::Ref<const VectorXd>& x) const;
  /// No throwing; NaN passes through.
  double RawValue(const Eigen::Ref<const VectorXd>& x) const;
  VectorXd Gradient(const Eigen::Ref<const VectorXd>& x) const;
  MatrixXd Hessian(const Eigen::Ref<const VectorXd>& x) const;
  /// Jet in the configured mode; `finite` reports NaN/inf instead of throwing.
  Jet Evaluate(const Eigen::Ref<const VectorXd>& x) const;
  /// Jet by central differences, regardless of mode.
  Jet EvaluateFiniteDifference(const Eigen::Ref<const VectorXd>& x) const;

 private:
  Expression expression_;
  int state_dim_;
  DerivativeMode mode_;
  double fd_step_;
  CompiledExpression value_code_;
  std::vector<CompiledExpression> gradient_code_;
  std::vector<CompiledExpression> hessian_code_;  // upper triangle, row major
};

}  // namespace asclf
