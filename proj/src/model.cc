#include "asclf/model.h"

#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace asclf {

bool Box::Contains(const Eigen::Ref<const VectorXd>& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

ControlledDiffusion::ControlledDiffusion(Spec spec) : spec_(std::move(spec)) {
  const int n = spec_.state_dim;
  const int m = spec_.noise_dim;
  if (n < 1) throw DimensionError("state dimension must be >= 1");
  if (m < 1) throw DimensionError("noise dimension must be >= 1");
  if (spec_.controls.empty()) throw DimensionError("control list is empty");
  const auto nc = spec_.controls.size();
  if (spec_.drift.size() != nc || spec_.diffusion.size() != nc) {
    throw DimensionError("drift/diffusion must be given for every control");
  }
  const int max_slot = n + static_cast<int>(spec_.param_names.size()) - 1;
  for (std::size_t c = 0; c < nc; ++c) {
    if (spec_.controls[c].params.size() != static_cast<Index>(spec_.param_names.size())) {
      throw DimensionError("control '" + spec_.controls[c].label + "' has " +
                           std::to_string(spec_.controls[c].params.size()) +
                           " parameter values, expected " +
                           std::to_string(spec_.param_names.size()));
    }
    if (static_cast<int>(spec_.drift[c].size()) != n) {
      throw DimensionError("drift has " + std::to_string(spec_.drift[c].size()) +
                           " components, expected N = " + std::to_string(n));
    }
    if (static_cast<int>(spec_.diffusion[c].size()) != n * m) {
      throw DimensionError("diffusion has " + std::to_string(spec_.diffusion[c].size()) +
                           " entries, expected N x M = " + std::to_string(n * m));
    }
    for (const auto* list : {&spec_.drift[c], &spec_.diffusion[c]}) {
      for (const Expression& e : *list) {
        if (e.MaxSlot() > max_slot) throw DimensionError("expression references unknown slot");
      }
    }
  }
  if (spec_.domain && (spec_.domain->lower.size() != n || spec_.domain->upper.size() != n)) {
    throw DimensionError("domain box dimension differs from N");
  }

  drift_code_.resize(nc);
  diffusion_code_.resize(nc);
  diffusion_zero_.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    for (const Expression& e : spec_.drift[c]) drift_code_[c].emplace_back(e);
    for (const Expression& e : spec_.diffusion[c]) {
      diffusion_code_[c].emplace_back(e);
      diffusion_zero_[c].push_back(e.IsConstant(0.0));
    }
  }
}

void ControlledDiffusion::CheckControl(int control) const {
  if (control < 0 || control >= num_controls()) {
    throw std::out_of_range("control index " + std::to_string(control) + " out of range");
  }
}

template <typename Fn>
void ControlledDiffusion::WithSlots(const Eigen::Ref<const VectorXd>& x, int control,
                                    Fn&& fn) const {
  CheckControl(control);
  if (x.size() != spec_.state_dim) throw DimensionError("state vector has wrong dimension");
  const VectorXd& params = spec_.controls[control].params;
  const std::size_t total = static_cast<std::size_t>(x.size() + params.size());
  std::array<double, 32> fixed;
  std::vector<double> heap;
  double* slots = fixed.data();
  if (total > fixed.size()) {
    heap.resize(total);
    slots = heap.data();
  }
  for (Index i = 0; i < x.size(); ++i) slots[i] = x[i];
  for (Index k = 0; k < params.size(); ++k) slots[x.size() + k] = params[k];
  fn(std::span<const double>(slots, total));
}

void ControlledDiffusion::Drift(const Eigen::Ref<const VectorXd>& x, int control,
                                Eigen::Ref<VectorXd> out) const {
  WithSlots(x, control, [&](std::span<const double> slots) {
    for (int i = 0; i < spec_.state_dim; ++i) out[i] = drift_code_[control][i](slots);
  });
}

VectorXd ControlledDiffusion::Drift(const Eigen::Ref<const VectorXd>& x, int control) const {
  VectorXd out(spec_.state_dim);
  Drift(x, control, out);
  return out;
}

void ControlledDiffusion::Diffusion(const Eigen::Ref<const VectorXd>& x, int control,
                                    Eigen::Ref<MatrixXd> out) const {
  const int m = spec_.noise_dim;
  WithSlots(x, control, [&](std::span<const double> slots) {
    for (int i = 0; i < spec_.state_dim; ++i) {
      for (int j = 0; j < m; ++j) {
        const std::size_t k = static_cast<std::size_t>(i * m + j);
        out(i, j) = diffusion_zero_[control][k] ? 0.0 : diffusion_code_[control][k](slots);
      }
    }
  });
}

MatrixXd ControlledDiffusion::Diffusion(const Eigen::Ref<const VectorXd>& x, int control) const {
  MatrixXd out(spec_.state_dim, spec_.noise_dim);
  Diffusion(x, control, out);
  return out;
}

MatrixXd EvalA(const ControlledDiffusion& model, const Eigen::Ref<const VectorXd>& x,
               int control) {
  const MatrixXd sigma = model.Diffusion(x, control);
  MatrixXd a = 0.5 * sigma * sigma.transpose();
  return 0.5 * (a + a.transpose());
}

EquilibriumCheck CheckControlledEquilibrium(const ControlledDiffusion& model,
                                            const Eigen::Ref<const VectorXd>& x0, double tol) {
  if (!(tol > 0.0)) throw PreconditionError("equilibrium tolerance must be positive");
  EquilibriumCheck result;
  result.residual = std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.num_controls(); ++c) {
    const double r = std::max(model.Drift(x0, c).norm(), model.Diffusion(x0, c).norm());
    if (r <= tol) {
      result.found = true;
      result.witness = c;
      result.residual = r;
      return result;
    }
    result.residual = std::min(result.residual, r);
  }
  return result;
}

double CheckLipschitzSample(const ControlledDiffusion& model, int n_pairs, std::uint64_t seed) {
  if (!model.domain()) throw PreconditionError("Lipschitz sampling needs a declared domain box");
  const Box& box = *model.domain();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = model.state_dim();
  auto sample = [&] {
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    return x;
  };
  double best = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    const VectorXd x = sample();
    const VectorXd y = sample();
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    for (int c = 0; c < model.num_controls(); ++c) {
      const double num = (model.Drift(x, c) - model.Drift(y, c)).norm() +
                         (model.Diffusion(x, c) - model.Diffusion(y, c)).norm();
      best = std::max(best, num / dist);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

CandidateFunction::CandidateFunction(Expression expression, int state_dim, DerivativeMode mode,
                                     double fd_step)
    : expression_(std::move(expression)),
      state_dim_(state_dim),
      mode_(mode),
      fd_step_(fd_step),
      value_code_(expression_) {
  if (expression_.MaxSlot() >= state_dim) {
    throw DimensionError("candidate references a variable beyond x" + std::to_string(state_dim));
  }
  if (!(fd_step > 0.0)) throw PreconditionError("fd_step must be positive");
  if (mode_ == DerivativeMode::kAnalytic) {
    std::vector<Expression> grad;
    for (int i = 0; i < state_dim; ++i) {
      grad.push_back(expression_.Differentiate(i));
      gradient_code_.emplace_back(grad.back());
    }
    for (int i = 0; i < state_dim; ++i) {
      for (int j = i; j < state_dim; ++j) hessian_code_.emplace_back(grad[i].Differentiate(j));
    }
  }
}

double CandidateFunction::RawValue(const Eigen::Ref<const VectorXd>& x) const {
  return value_code_(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

double CandidateFunction::Value(const Eigen::Ref<const VectorXd>& x) const {
  const double v = RawValue(x);
  if (!std::isfinite(v)) throw NonFiniteError("candidate value is not finite");
  return v;
}

Jet CandidateFunction::EvaluateFiniteDifference(const Eigen::Ref<const VectorXd>& x) const {
  const int n = state_dim_;
  const double h = fd_step_;
  Jet jet;
  VectorXd y = x;
  jet.value = RawValue(y);
  jet.gradient.resize(n);
  jet.hessian.resize(n, n);
  auto f = [&](int i, double di, int j, double dj) {
    y = x;
    y[i] += di;
    if (j >= 0) y[j] += dj;
    return RawValue(y);
  };
  for (int i = 0; i < n; ++i) {
    const double fp = f(i, h, -1, 0.0);
    const double fm = f(i, -h, -1, 0.0);
    jet.gradient[i] = (fp - fm) / (2.0 * h);
    jet.hessian(i, i) = (fp - 2.0 * jet.value + fm) / (h * h);
    for (int j = 0; j < i; ++j) {
      const double mixed =
          (f(i, h, j, h) - f(i, h, j, -h) - f(i, -h, j, h) + f(i, -h, j, -h)) / (4.0 * h * h);
      jet.hessian(i, j) = mixed;
      jet.hessian(j, i) = mixed;
    }
  }
  jet.finite = std::isfinite(jet.value) && jet.gradient.allFinite() && jet.hessian.allFinite();
  return jet;
}

Jet CandidateFunction::Evaluate(const Eigen::Ref<const VectorXd>& x) const {
  if (mode_ == DerivativeMode::kCentralDifference) return EvaluateFiniteDifference(x);
  const int n = state_dim_;
  const VectorXd xc = x;
  const std::span<const double> slots(xc.data(), static_cast<std::size_t>(n));
  Jet jet;
  jet.value = value_code_(slots);
  jet.gradient.resize(n);
  jet.hessian.resize(n, n);
  for (int i = 0; i < n; ++i) jet.gradient[i] = gradient_code_[i](slots);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = hessian_code_[k++](slots);
      jet.hessian(i, j) = v;
      jet.hessian(j, i) = v;
    }
  }
  jet.finite = std::isfinite(jet.value) && jet.gradient.allFinite() && jet.hessian.allFinite();
  return jet;
}

VectorXd CandidateFunction::Gradient(const Eigen::Ref<const VectorXd>& x) const {
  const Jet jet = Evaluate(x);
  if (!jet.finite) throw NonFiniteError("candidate gradient is not finite");
  return jet.gradient;
}

MatrixXd CandidateFunction::Hessian(const Eigen::Ref<const VectorXd>& x) const {
  const Jet jet = Evaluate(x);
  if (!jet.finite) throw NonFiniteError("candidate Hessian is not finite");
  return jet.hessian;
}

}  // namespace asclf
