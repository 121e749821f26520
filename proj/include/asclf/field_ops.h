#pragma once

#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"
#include "asclf/grid.h"
#include "asclf/model.h"

namespace asclf {

/// Second-order central differences along one axis of a node-valued array.
/// Falls back to second-order one-sided formulas on the grid faces and sets
/// `*one_sided`.
template <typename Derived>
double AxisDerivative(const Grid& grid, const Eigen::DenseBase<Derived>& values, Index node,
                      int axis, bool* one_sided) {
  const Index s = grid.stride(axis);
  const int pos = grid.MultiIndex(node)[axis];
  const double h = grid.spacing()[axis];
  if (pos == 0) {
    *one_sided = true;
    return (-3.0 * values[node] + 4.0 * values[node + s] - values[node + 2 * s]) / (2.0 * h);
  }
  if (pos == grid.nodes()[axis] - 1) {
    *one_sided = true;
    return (3.0 * values[node] - 4.0 * values[node - s] + values[node - 2 * s]) / (2.0 * h);
  }
  return (values[node + s] - values[node - s]) / (2.0 * h);
}

template <typename Derived>
double AxisSecondDerivative(const Grid& grid, const Eigen::DenseBase<Derived>& values, Index node,
                            int axis, bool* one_sided) {
  const Index s = grid.stride(axis);
  const int pos = grid.MultiIndex(node)[axis];
  const double h = grid.spacing()[axis];
  Index center = node;
  if (pos == 0) {
    *one_sided = true;
    center = node + s;
  } else if (pos == grid.nodes()[axis] - 1) {
    *one_sided = true;
    center = node - s;
  }
  return (values[center + s] - 2.0 * values[center] + values[center - s]) / (h * h);
}

struct FieldGradient {
  VectorXd p;
  bool one_sided = false;
};
struct FieldHessian {
  MatrixXd y;
  bool one_sided = false;
};

FieldGradient Gradient(const ScalarField& field, Index node);
FieldHessian Hessian(const ScalarField& field, Index node);

/// Anything that can supply (value, DV, D^2V) at the nodes of a grid.
class JetSource {
 public:
  virtual ~JetSource() = default;
  virtual Jet JetAt(const Grid& grid, Index node) const = 0;
  virtual double ValueAt(const Grid& grid, Index node) const = 0;
  /// Independent second-derivative estimate used to flag nonsmooth points;
  /// sources without one return false.
  virtual bool CrossCheck(const Grid&, Index, const Jet&, double*) const { return false; }
};

/// Evaluates a candidate at node coordinates in its own derivative mode.
class CandidateJets : public JetSource {
 public:
  explicit CandidateJets(const CandidateFunction& f) : f_(f) {}
  Jet JetAt(const Grid& grid, Index node) const override;
  double ValueAt(const Grid& grid, Index node) const override;
  /// Relative distance between the analytic and central-difference Hessians.
  bool CrossCheck(const Grid& grid, Index node, const Jet& jet, double* mismatch) const override;

 private:
  const CandidateFunction& f_;
};

/// Grid finite differences of a stored field. The grid passed to JetAt must
/// be the field's own grid.
class FieldJets : public JetSource {
 public:
  explicit FieldJets(const ScalarField& field) : field_(field) {}
  Jet JetAt(const Grid& grid, Index node) const override;
  double ValueAt(const Grid& grid, Index node) const override;

 private:
  const ScalarField& field_;
};

/// phi o V by the chain rule: D(phi o V) = phi'(V) DV,
/// D^2(phi o V) = phi'(V) D^2V + phi''(V) DV DV^T. `phi` is an expression in t
/// (slot 0).
class ComposedJets : public JetSource {
 public:
  ComposedJets(const JetSource& inner, const Expression& phi);
  Jet JetAt(const Grid& grid, Index node) const override;
  double ValueAt(const Grid& grid, Index node) const override;
  double Derivative(double t) const;

 private:
  const JetSource& inner_;
  CompiledExpression phi_;
  CompiledExpression dphi_;
  CompiledExpression d2phi_;
};

/// Boundary of the sublevel set {V <= level} on a grid. Boundary nodes are
/// nodes inside the set with at least one axis neighbour outside. `normal`
/// holds the unit interior normal -DV/|DV| and `curvature` the matching
/// second-order part -P D^2V P / |DV| with P the tangential projector.
struct LevelSet {
  double level = 0.0;
  std::vector<Index> nodes;
  std::vector<VectorXd> normal;
  std::vector<MatrixXd> curvature;
  std::vector<bool> on_grid_edge;
  /// Nodes whose normal does not point towards a lower neighbour.
  int inconsistent_normals = 0;
  /// Candidate boundary nodes dropped for a vanishing or non-finite gradient.
  int degenerate_nodes = 0;
  bool touches_grid_edge = false;
};

/// Throws PreconditionError when `level` is not strictly between the field's
/// minimum and maximum on the grid (the boundary would be empty).
LevelSet ExtractLevelSet(const JetSource& v, const Grid& grid, double level);

}  // namespace asclf
