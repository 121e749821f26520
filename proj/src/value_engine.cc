#include "asclf/value_engine.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asclf/parallel.h"

namespace asclf {
namespace {

// Interpolation stencils of every successor state, laid out as
// [node][control][increment][corner].
class StencilTable {
 public:
  StencilTable(const ControlledDiffusion& model, const Grid& grid, const RobustScheme& scheme)
      : controls_(model.num_controls()),
        increments_(static_cast<int>(scheme.increments.size())),
        corners_(1 << grid.dim()) {
    const std::size_t slots =
        static_cast<std::size_t>(grid.size()) * static_cast<std::size_t>(controls_ * increments_);
    index_.assign(slots * static_cast<std::size_t>(corners_), -1);
    weight_.assign(slots * static_cast<std::size_t>(corners_), 0.0);
    offgrid_norm_.assign(slots, 0.0);
    ParallelFor(grid.size(), scheme.workers, [&](Index begin, Index end) {
      VectorXd x(grid.dim());
      for (Index i = begin; i < end; ++i) {
        grid.Node(i, x);
        for (int a = 0; a < controls_; ++a) {
          for (int w = 0; w < increments_; ++w) {
            const VectorXd y = Step(model, x, a, scheme.increments[static_cast<std::size_t>(w)], scheme.dt);
            const std::size_t slot = Slot(i, a, w);
            const Grid::Stencil s = grid.Locate(y);
            if (!s.inside) {
              offgrid_norm_[slot] = y.allFinite() ? y.norm() : std::numeric_limits<double>::infinity();
              continue;
            }
            for (int c = 0; c < corners_; ++c) {
              index_[slot * corners_ + c] = s.index[static_cast<std::size_t>(c)];
              weight_[slot * corners_ + c] = s.weight[static_cast<std::size_t>(c)];
            }
          }
        }
      }
    });
  }

  int controls() const { return controls_; }
  int increments() const { return increments_; }

  std::size_t Slot(Index node, int control, int increment) const {
    return (static_cast<std::size_t>(node) * controls_ + control) * increments_ + increment;
  }
  bool Inside(std::size_t slot) const { return index_[slot * corners_] >= 0; }
  double OffgridNorm(std::size_t slot) const { return offgrid_norm_[slot]; }
  double Interpolate(const VectorXd& values, std::size_t slot) const {
    double v = 0.0;
    const std::size_t base = slot * corners_;
    for (int c = 0; c < corners_; ++c) v += weight_[base + c] * values[index_[base + c]];
    return v;
  }

 private:
  int controls_;
  int increments_;
  int corners_;
  std::vector<Index> index_;
  std::vector<double> weight_;
  std::vector<double> offgrid_norm_;
};

// Jacobi sweeps of `update(node, previous)` until the sup-norm change drops
// below the tolerance.
template <typename Update>
void Iterate(const RobustScheme& scheme, ValueRun* run, Update&& update) {
  VectorXd& current = run->field.values;
  VectorXd next(current.size());
  for (int it = 0; it < scheme.max_iter; ++it) {
    ParallelFor(current.size(), scheme.workers, [&](Index begin, Index end) {
      for (Index i = begin; i < end; ++i) next[i] = update(i, current);
    });
    double residual = 0.0;
    for (Index i = 0; i < current.size(); ++i) {
      if (std::isnan(next[i])) {
        throw NonFiniteError("value iteration produced NaN at node " + std::to_string(i) +
                             " in sweep " + std::to_string(it + 1));
      }
      const double change = next[i] - current[i];
      if (change < -1e-12 * (1.0 + std::abs(current[i]))) {
        run->monotone = false;
        run->worst_decrease = std::max(run->worst_decrease, -change);
      }
      residual = std::max(residual, std::abs(change));
    }
    current.swap(next);
    run->residual_history.push_back(residual);
    if (residual < scheme.residual_tol) {
      run->converged = true;
      break;
    }
  }
  run->field.iterations = run->iterations();
  run->field.residual = run->residual_history.empty() ? 0.0 : run->residual_history.back();
}

}  // namespace

std::vector<VectorXd> DefaultIncrements(int noise_dim, double dt) {
  std::vector<VectorXd> out;
  out.push_back(VectorXd::Zero(noise_dim));
  const double s = std::sqrt(dt);
  for (int j = 0; j < noise_dim; ++j) {
    out.push_back(s * VectorXd::Unit(noise_dim, j));
    out.push_back(-s * VectorXd::Unit(noise_dim, j));
  }
  return out;
}

double DefaultTimeStep(const ControlledDiffusion& model, const Grid& grid) {
  double fmax = 0.0;
  VectorXd x(grid.dim());
  VectorXd f(grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    grid.Node(i, x);
    for (int a = 0; a < model.num_controls(); ++a) {
      model.Drift(x, a, f);
      if (f.allFinite()) fmax = std::max(fmax, f.norm());
    }
  }
  return grid.min_spacing() / (2.0 * fmax + 1.0);
}

RobustScheme RobustScheme::Resolved(const ControlledDiffusion& model, const Grid& grid) const {
  if (grid.dim() != model.state_dim()) throw DimensionError("grid and model dimensions differ");
  RobustScheme out = *this;
  if (out.dt <= 0.0) out.dt = DefaultTimeStep(model, grid);
  if (!(out.dt > 0.0) || !std::isfinite(out.dt)) throw PreconditionError("time step must be positive");
  if (out.increments.empty()) out.increments = DefaultIncrements(model.noise_dim(), out.dt);
  if (!(out.cap > 0.0)) throw PreconditionError("cap must be positive");
  if (out.max_iter < 1) throw PreconditionError("max_iter must be at least 1");
  for (const VectorXd& w : out.increments) {
    if (w.size() != model.noise_dim()) throw DimensionError("increment length differs from M");
    const bool mirrored = std::any_of(out.increments.begin(), out.increments.end(),
                                      [&](const VectorXd& v) { return (v + w).isZero(0.0); });
    if (!mirrored) throw PreconditionError("increment set must be symmetric");
  }
  return out;
}

VectorXd Step(const ControlledDiffusion& model, const Eigen::Ref<const VectorXd>& x, int control,
              const Eigen::Ref<const VectorXd>& w, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("time step must be positive");
  VectorXd y = x + dt * model.Drift(x, control);
  if (!w.isZero(0.0)) y.noalias() += model.Diffusion(x, control) * w;
  return y;
}

ValueRun WorstCaseSupValue(const ControlledDiffusion& model, const Grid& grid,
                           const RobustScheme& scheme_in, const StateCost& cost_in) {
  const RobustScheme scheme = scheme_in.Resolved(model, grid);
  const StateCost cost = cost_in ? cost_in : StateCost([](const Eigen::Ref<const VectorXd>& x) {
    return x.norm();
  });
  VectorXd running(grid.size());
  for (Index i = 0; i < grid.size(); ++i) running[i] = cost(grid.Node(i));
  ValueRun run(ScalarField(grid, running.cwiseMin(scheme.cap), "sup_value"), scheme);
  const StencilTable table(model, grid, scheme);
  Iterate(scheme, &run, [&](Index i, const VectorXd& v) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < table.controls(); ++a) {
      double worst = -std::numeric_limits<double>::infinity();
      for (int w = 0; w < table.increments(); ++w) {
        const std::size_t slot = table.Slot(i, a, w);
        worst = std::max(worst, table.Inside(slot) ? table.Interpolate(v, slot) : scheme.cap);
      }
      best = std::min(best, worst);
    }
    return std::min(scheme.cap, std::max(running[i], best));
  });
  run.field.saturated.resize(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) run.field.saturated[i] = run.field.values[i] >= scheme.cap;
  return run;
}

ValueRun WorstCaseIntegralValue(const ControlledDiffusion& model, const Grid& grid,
                                const GaugeFunction& l, const RobustScheme& scheme_in) {
  const RobustScheme scheme = scheme_in.Resolved(model, grid);
  VectorXd running(grid.size());
  std::vector<bool> pinned(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    const VectorXd x = grid.Node(i);
    running[i] = l(x) * scheme.dt;
    if (!std::isfinite(running[i])) throw NonFiniteError("gauge is not finite on the grid");
    pinned[static_cast<std::size_t>(i)] = x.norm() <= grid.rho();
  }
  ValueRun run(ScalarField(grid, VectorXd::Zero(grid.size()), "integral_value"), scheme);
  const StencilTable table(model, grid, scheme);
  Iterate(scheme, &run, [&](Index i, const VectorXd& v) {
    if (pinned[static_cast<std::size_t>(i)]) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < table.controls(); ++a) {
      double worst = -std::numeric_limits<double>::infinity();
      for (int w = 0; w < table.increments(); ++w) {
        const std::size_t slot = table.Slot(i, a, w);
        worst = std::max(worst, table.Inside(slot) ? table.Interpolate(v, slot) : scheme.cap);
      }
      best = std::min(best, worst);
    }
    return std::min(scheme.cap, running[i] + best);
  });
  run.field.saturated.resize(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) run.field.saturated[i] = run.field.values[i] >= scheme.cap;
  return run;
}

DiscountedResult DiscountedValueAndPropSet(const ControlledDiffusion& model, const Grid& grid,
                                           double k_radius, double lambda, double theta,
                                           const RobustScheme& scheme_in) {
  if (!(lambda > 0.0)) throw PreconditionError("discount lambda must be positive");
  if (!(theta > 0.0)) throw PreconditionError("zero threshold theta must be positive");
  if (!(k_radius > 0.0)) throw PreconditionError("radius K must be positive");
  const RobustScheme scheme = scheme_in.Resolved(model, grid);
  const auto c_k = [k_radius](double s) { return std::max(0.0, s - k_radius); };
  VectorXd running(grid.size());
  for (Index i = 0; i < grid.size(); ++i) running[i] = c_k(grid.Node(i).norm()) * scheme.dt;
  DiscountedResult out(ValueRun(ScalarField(grid, VectorXd::Zero(grid.size()), "discounted_value"), scheme));
  const StencilTable table(model, grid, scheme);
  const double decay = std::exp(-lambda * scheme.dt);
  const double mean = 1.0 / table.increments();
  Iterate(scheme, &out.run, [&](Index i, const VectorXd& v) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < table.controls(); ++a) {
      double sum = 0.0;
      for (int w = 0; w < table.increments(); ++w) {
        const std::size_t slot = table.Slot(i, a, w);
        sum += table.Inside(slot) ? table.Interpolate(v, slot) : c_k(table.OffgridNorm(slot)) / lambda;
      }
      best = std::min(best, sum * mean);
    }
    return running[i] + decay * best;
  });
  out.in_prop_set.resize(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    const bool in = out.run.field.values[i] <= theta;
    out.in_prop_set[static_cast<std::size_t>(i)] = in;
    if (in) out.prop_set.push_back(i);
  }
  return out;
}

FeedbackMap SynthesizeFeedback(const ControlledDiffusion& model, const ScalarField& value,
                               const RobustScheme& scheme_in) {
  const Grid& grid = value.grid;
  const RobustScheme scheme = scheme_in.Resolved(model, grid);
  const StencilTable table(model, grid, scheme);
  FeedbackMap out{grid, std::vector<int>(static_cast<std::size_t>(grid.size()), 0),
                  "argmin of worst-case successor " + value.name};
  ParallelFor(grid.size(), scheme.workers, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int a = 0; a < table.controls(); ++a) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int w = 0; w < table.increments(); ++w) {
          const std::size_t slot = table.Slot(i, a, w);
          worst = std::max(worst, table.Inside(slot) ? table.Interpolate(value.values, slot) : scheme.cap);
        }
        if (worst < best) {
          best = worst;
          arg = a;
        }
      }
      out.control[static_cast<std::size_t>(i)] = arg;
    }
  });
  return out;
}

ControlledDiffusion ExtendedSystem(const ControlledDiffusion& model, const Expression& l) {
  const int n = model.state_dim();
  const int m = model.noise_dim();
  if (l.MaxSlot() >= n) throw DimensionError("gauge references a slot beyond the state");
  ControlledDiffusion::Spec spec = model.spec();
  spec.state_dim = n + 1;
  // Control parameters move up one slot to make room for y.
  const auto shift = [n](const Expression& e) {
    return e.Substitute([n](int slot, const std::string& name) {
      return Expression::Variable(slot >= n ? slot + 1 : slot, name);
    });
  };
  for (std::size_t c = 0; c < spec.controls.size(); ++c) {
    for (auto& e : spec.drift[c]) e = shift(e);
    for (auto& e : spec.diffusion[c]) e = shift(e);
    spec.drift[c].push_back(l);
    for (int j = 0; j < m; ++j) spec.diffusion[c].push_back(Expression::Constant(0.0));
  }
  if (spec.domain) {
    Box box;
    box.lower.resize(n + 1);
    box.upper.resize(n + 1);
    box.lower << spec.domain->lower, -std::numeric_limits<double>::infinity();
    box.upper << spec.domain->upper, std::numeric_limits<double>::infinity();
    spec.domain = box;
  }
  return ControlledDiffusion(std::move(spec));
}

}  // namespace asclf
