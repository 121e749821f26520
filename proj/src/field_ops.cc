#include "asclf/field_ops.h"

#include <cmath>

namespace asclf {

FieldGradient Gradient(const ScalarField& field, Index node) {
  const Grid& g = field.grid;
  FieldGradient out{VectorXd(g.dim())};
  for (int k = 0; k < g.dim(); ++k) {
    out.p[k] = AxisDerivative(g, field.values, node, k, &out.one_sided);
  }
  return out;
}

FieldHessian Hessian(const ScalarField& field, Index node) {
  const Grid& g = field.grid;
  const int n = g.dim();
  FieldHessian out{MatrixXd(n, n)};
  for (int i = 0; i < n; ++i) {
    out.y(i, i) = AxisSecondDerivative(g, field.values, node, i, &out.one_sided);
    for (int j = 0; j < i; ++j) {
      // D_j of D_i, differencing the first derivatives at the j-neighbours.
      const Index s = g.stride(j);
      const int pos = g.MultiIndex(node)[j];
      const double h = g.spacing()[j];
      auto di = [&](Index at) { return AxisDerivative(g, field.values, at, i, &out.one_sided); };
      double mixed;
      if (pos == 0) {
        out.one_sided = true;
        mixed = (-3.0 * di(node) + 4.0 * di(node + s) - di(node + 2 * s)) / (2.0 * h);
      } else if (pos == g.nodes()[j] - 1) {
        out.one_sided = true;
        mixed = (3.0 * di(node) - 4.0 * di(node - s) + di(node - 2 * s)) / (2.0 * h);
      } else {
        mixed = (di(node + s) - di(node - s)) / (2.0 * h);
      }
      out.y(i, j) = mixed;
      out.y(j, i) = mixed;
    }
  }
  return out;
}

Jet CandidateJets::JetAt(const Grid& grid, Index node) const {
  return f_.Evaluate(grid.Node(node));
}

double CandidateJets::ValueAt(const Grid& grid, Index node) const {
  return f_.RawValue(grid.Node(node));
}

bool CandidateJets::CrossCheck(const Grid& grid, Index node, const Jet& jet,
                               double* mismatch) const {
  if (f_.mode() != DerivativeMode::kAnalytic) return false;
  const Jet fd = f_.EvaluateFiniteDifference(grid.Node(node));
  if (!fd.finite) {
    *mismatch = std::numeric_limits<double>::infinity();
    return true;
  }
  *mismatch = (fd.hessian - jet.hessian).norm() / (1.0 + jet.hessian.norm());
  return true;
}

Jet FieldJets::JetAt(const Grid& grid, Index node) const {
  if (!(grid == field_.grid)) throw PreconditionError("field jets requested on a foreign grid");
  Jet jet;
  jet.value = field_.values[node];
  const FieldGradient g = Gradient(field_, node);
  const FieldHessian h = Hessian(field_, node);
  jet.gradient = g.p;
  jet.hessian = h.y;
  jet.one_sided = g.one_sided || h.one_sided;
  jet.finite = std::isfinite(jet.value) && jet.gradient.allFinite() && jet.hessian.allFinite();
  return jet;
}

double FieldJets::ValueAt(const Grid& grid, Index node) const {
  if (!(grid == field_.grid)) throw PreconditionError("field values requested on a foreign grid");
  return field_.values[node];
}

ComposedJets::ComposedJets(const JetSource& inner, const Expression& phi) : inner_(inner) {
  if (phi.MaxSlot() > 0) throw DimensionError("phi must be an expression in t only");
  const Expression d1 = phi.Differentiate(0);
  phi_ = CompiledExpression(phi);
  dphi_ = CompiledExpression(d1);
  d2phi_ = CompiledExpression(d1.Differentiate(0));
}

double ComposedJets::Derivative(double t) const { return dphi_(std::span<const double>(&t, 1)); }

Jet ComposedJets::JetAt(const Grid& grid, Index node) const {
  Jet jet = inner_.JetAt(grid, node);
  const double t = jet.value;
  const std::span<const double> slot(&t, 1);
  const double d1 = dphi_(slot);
  const double d2 = d2phi_(slot);
  jet.value = phi_(slot);
  jet.hessian = d1 * jet.hessian + d2 * jet.gradient * jet.gradient.transpose();
  jet.gradient *= d1;
  jet.finite = jet.finite && std::isfinite(jet.value) && jet.gradient.allFinite() &&
               jet.hessian.allFinite();
  return jet;
}

double ComposedJets::ValueAt(const Grid& grid, Index node) const {
  const double t = inner_.ValueAt(grid, node);
  return phi_(std::span<const double>(&t, 1));
}

LevelSet ExtractLevelSet(const JetSource& v, const Grid& grid, double level) {
  VectorXd values(grid.size());
  for (Index i = 0; i < grid.size(); ++i) values[i] = v.ValueAt(grid, i);
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(level > lo && level < hi)) {
    throw PreconditionError("level " + std::to_string(level) + " outside (" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "): empty level set");
  }

  LevelSet set;
  set.level = level;
  const int n = grid.dim();
  for (Index i = 0; i < grid.size(); ++i) {
    if (!(values[i] <= level)) continue;
    const VectorXi multi = grid.MultiIndex(i);
    bool crosses = false;
    bool edge = false;
    VectorXd inward = VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
      const Index s = grid.stride(k);
      for (int dir : {-1, 1}) {
        const int pos = multi[k] + dir;
        if (pos < 0 || pos >= grid.nodes()[k]) {
          edge = true;
          continue;
        }
        const Index nb = i + dir * s;
        if (values[nb] > level) crosses = true;
        if (values[nb] < values[i]) inward[k] += dir * grid.spacing()[k];
      }
    }
    if (!crosses) continue;

    const Jet jet = v.JetAt(grid, i);
    const double norm = jet.gradient.norm();
    if (!jet.finite || !(norm > 0.0)) {
      ++set.degenerate_nodes;
      continue;
    }
    const VectorXd p = -jet.gradient / norm;
    const MatrixXd proj = MatrixXd::Identity(n, n) - p * p.transpose();
    MatrixXd y = -(proj * jet.hessian * proj) / norm;
    y = 0.5 * (y + y.transpose());
    if (inward.squaredNorm() > 0.0 && !(p.dot(inward) > 0.0)) ++set.inconsistent_normals;

    set.nodes.push_back(i);
    set.normal.push_back(p);
    set.curvature.push_back(std::move(y));
    set.on_grid_edge.push_back(edge);
    set.touches_grid_edge = set.touches_grid_edge || edge;
  }
  if (set.nodes.empty()) throw PreconditionError("level set has no usable boundary nodes");
  return set;
}

}  // namespace asclf
