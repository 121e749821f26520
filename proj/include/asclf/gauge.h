#pragma once

#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"
#include "asclf/model.h"

namespace asclf {

/// Scalar gauge of the state: the decay rate l of the strict Lyapunov
/// inequality, or a comparison function gamma(r).
///
/// Three representations:
///   - radial piecewise linear through knots (r_k, v_k), constant beyond the
///     last knot;
///   - radial expression g(r), evaluated at r = |x|;
///   - general expression in x_1..x_N.
class GaugeFunction {
 public:
  enum class Kind { kKnots, kRadialExpression, kStateExpression };

  /// l == 0.
  static GaugeFunction Zero();
  /// Knot radii strictly increasing, first knot at r = 0.
  static GaugeFunction PiecewiseLinear(std::vector<double> radii, std::vector<double> values);
  static GaugeFunction Radial(const Expression& profile);
  static GaugeFunction OfState(const Expression& expression, int state_dim);

  Kind kind() const { return kind_; }
  bool is_radial() const { return kind_ != Kind::kStateExpression; }
  bool is_zero() const { return zero_; }

  double operator()(const Eigen::Ref<const VectorXd>& x) const;
  /// Radial profile; throws for state expressions.
  double AtRadius(double r) const;

  const std::vector<double>& knot_radii() const { return radii_; }
  const std::vector<double>& knot_values() const { return values_; }

  /// Nondecreasing in r. Exact for knots, sampled on [0, r_max] otherwise.
  bool IsMonotone(double r_max = 10.0, int samples = 2001) const;
  /// Largest slope; exact for knots, sampled on [0, r_max] otherwise.
  double LipschitzConstant(double r_max = 10.0, int samples = 2001) const;
  double ValueAtZero(int state_dim) const;

  /// The same function as an expression in x_1..x_N (knots become a sum of
  /// clamped ramps in |x|).
  Expression ToExpression(int state_dim) const;

 private:
  GaugeFunction() = default;

  Kind kind_ = Kind::kKnots;
  bool zero_ = false;
  std::vector<double> radii_;
  std::vector<double> values_;
  Expression expression_;
  CompiledExpression code_;
  int state_dim_ = 0;
};

}  // namespace asclf
