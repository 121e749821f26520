#include "asclf/gauge.h"

#include <algorithm>
#include <cmath>

namespace asclf {

GaugeFunction GaugeFunction::Zero() {
  GaugeFunction g = PiecewiseLinear({0.0, 1.0}, {0.0, 0.0});
  g.zero_ = true;
  return g;
}

GaugeFunction GaugeFunction::PiecewiseLinear(std::vector<double> radii, std::vector<double> values) {
  if (radii.size() != values.size() || radii.empty()) {
    throw DimensionError("gauge knots need matching, nonempty radius/value lists");
  }
  if (radii.front() != 0.0) throw PreconditionError("first gauge knot must sit at r = 0");
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] > radii[k - 1])) throw PreconditionError("gauge knot radii must increase");
  }
  GaugeFunction g;
  g.kind_ = Kind::kKnots;
  g.radii_ = std::move(radii);
  g.values_ = std::move(values);
  g.zero_ = std::all_of(g.values_.begin(), g.values_.end(), [](double v) { return v == 0.0; });
  return g;
}

GaugeFunction GaugeFunction::Radial(const Expression& profile) {
  if (profile.MaxSlot() > 0) throw DimensionError("radial gauge must be an expression in r only");
  GaugeFunction g;
  g.kind_ = Kind::kRadialExpression;
  g.expression_ = profile;
  g.code_ = CompiledExpression(profile);
  g.zero_ = profile.IsConstant(0.0);
  return g;
}

GaugeFunction GaugeFunction::OfState(const Expression& expression, int state_dim) {
  if (expression.MaxSlot() >= state_dim) throw DimensionError("gauge references unknown state slot");
  GaugeFunction g;
  g.kind_ = Kind::kStateExpression;
  g.expression_ = expression;
  g.code_ = CompiledExpression(expression);
  g.state_dim_ = state_dim;
  g.zero_ = expression.IsConstant(0.0);
  return g;
}

double GaugeFunction::AtRadius(double r) const {
  switch (kind_) {
    case Kind::kKnots: {
      if (r >= radii_.back()) return values_.back();
      if (r <= 0.0) return values_.front();
      const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
      const std::size_t k = static_cast<std::size_t>(it - radii_.begin());
      const double t = (r - radii_[k - 1]) / (radii_[k] - radii_[k - 1]);
      return values_[k - 1] + t * (values_[k] - values_[k - 1]);
    }
    case Kind::kRadialExpression:
      return code_(std::span<const double>(&r, 1));
    case Kind::kStateExpression:
      break;
  }
  throw PreconditionError("gauge is not radial");
}

double GaugeFunction::operator()(const Eigen::Ref<const VectorXd>& x) const {
  if (kind_ == Kind::kStateExpression) {
    return code_(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  return AtRadius(x.norm());
}

bool GaugeFunction::IsMonotone(double r_max, int samples) const {
  if (kind_ == Kind::kKnots) {
    for (std::size_t k = 1; k < values_.size(); ++k) {
      if (values_[k] < values_[k - 1]) return false;
    }
    return true;
  }
  if (kind_ == Kind::kStateExpression) return false;
  double prev = AtRadius(0.0);
  for (int s = 1; s < samples; ++s) {
    const double v = AtRadius(r_max * s / (samples - 1));
    if (v < prev) return false;
    prev = v;
  }
  return true;
}

double GaugeFunction::LipschitzConstant(double r_max, int samples) const {
  double best = 0.0;
  if (kind_ == Kind::kKnots) {
    for (std::size_t k = 1; k < values_.size(); ++k) {
      best = std::max(best, std::abs(values_[k] - values_[k - 1]) / (radii_[k] - radii_[k - 1]));
    }
    return best;
  }
  if (kind_ == Kind::kStateExpression) {
    // Sampled along the coordinate axes and the diagonal.
    VectorXd dir = VectorXd::Constant(state_dim_, 1.0 / std::sqrt(double(state_dim_)));
    double prev = (*this)(VectorXd::Zero(state_dim_));
    for (int s = 1; s < samples; ++s) {
      const double r = r_max * s / (samples - 1);
      const double v = (*this)(r * dir);
      best = std::max(best, std::abs(v - prev) / (r_max / (samples - 1)));
      prev = v;
    }
    return best;
  }
  double prev = AtRadius(0.0);
  const double dr = r_max / (samples - 1);
  for (int s = 1; s < samples; ++s) {
    const double v = AtRadius(dr * s);
    best = std::max(best, std::abs(v - prev) / dr);
    prev = v;
  }
  return best;
}

double GaugeFunction::ValueAtZero(int state_dim) const {
  return (*this)(VectorXd::Zero(state_dim));
}

Expression GaugeFunction::ToExpression(int state_dim) const {
  if (kind_ == Kind::kStateExpression) return expression_;
  Expression sum_sq = Expression::Constant(0.0);
  for (int i = 0; i < state_dim; ++i) {
    const Expression xi = Expression::Variable(i, "x" + std::to_string(i + 1));
    sum_sq = sum_sq + pow(xi, Expression::Constant(2.0));
  }
  const Expression r = sqrt(sum_sq);
  if (kind_ == Kind::kRadialExpression) {
    return expression_.Substitute([&](int, const std::string&) { return r; });
  }
  Expression out = Expression::Constant(values_.front());
  for (std::size_t k = 1; k < radii_.size(); ++k) {
    const double slope = (values_[k] - values_[k - 1]) / (radii_[k] - radii_[k - 1]);
    if (slope == 0.0) continue;
    const Expression clamped = min(max(r, Expression::Constant(radii_[k - 1])),
                                   Expression::Constant(radii_[k]));
    out = out + Expression::Constant(slope) * (clamped - Expression::Constant(radii_[k - 1]));
  }
  return out;
}

}  // namespace asclf
