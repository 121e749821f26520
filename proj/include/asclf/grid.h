#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asclf/model.h"

namespace asclf {

using Eigen::VectorXi;

/// Tensor-product grid of nodes on a box. Linear node indices are row major:
/// the last axis varies fastest.
class Grid {
 public:
  /// rho < 0 selects the default origin exclusion radius 2 * max spacing.
  Grid(VectorXd lower, VectorXd upper, VectorXi nodes, double rho = -1.0);
  /// Same node count on every axis of `box`.
  static Grid OnBox(const Box& box, int nodes_per_axis, double rho = -1.0);

  int dim() const { return static_cast<int>(lower_.size()); }
  Index size() const { return size_; }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }
  const VectorXi& nodes() const { return nodes_; }
  const VectorXd& spacing() const { return spacing_; }
  double max_spacing() const { return spacing_.maxCoeff(); }
  double min_spacing() const { return spacing_.minCoeff(); }
  double rho() const { return rho_; }
  Index stride(int axis) const { return strides_[axis]; }

  VectorXd Node(Index i) const;
  void Node(Index i, Eigen::Ref<VectorXd> out) const;
  VectorXi MultiIndex(Index i) const;
  Index Linear(const VectorXi& multi) const;
  /// True when the node lies on the outer face of the grid along any axis.
  bool OnBoundary(Index i) const;

  bool Contains(const Eigen::Ref<const VectorXd>& x) const;
  Index NearestNode(const Eigen::Ref<const VectorXd>& x) const;

  /// Corner indices and multilinear weights of the cell containing x.
  struct Stencil {
    std::vector<Index> index;
    std::vector<double> weight;
    bool inside = false;
  };
  Stencil Locate(const Eigen::Ref<const VectorXd>& x) const;

  /// Multilinear interpolation of node values; nullopt outside the box.
  std::optional<double> Interpolate(const VectorXd& values,
                                    const Eigen::Ref<const VectorXd>& x) const;

  bool operator==(const Grid& other) const;

 private:
  VectorXd lower_;
  VectorXd upper_;
  VectorXi nodes_;
  VectorXd spacing_;
  std::vector<Index> strides_;
  Index size_ = 0;
  double rho_ = 0.0;
};

/// One value per grid node plus bookkeeping.
struct ScalarField {
  Grid grid;
  VectorXd values;
  std::string name;
  int iterations = 0;
  double residual = 0.0;
  /// Nodes whose value was clipped to a cap; empty means none flagged.
  std::vector<bool> saturated;

  ScalarField(Grid g, VectorXd v, std::string n = "value");
  static ScalarField Sample(const Grid& grid, const CandidateFunction& f, std::string name = "value");

  std::optional<double> At(const Eigen::Ref<const VectorXd>& x) const {
    return grid.Interpolate(values, x);
  }
};

/// CSV with header "x1,...,xN,<column>", one row per node in linear order.
void WriteFieldCsv(const ScalarField& field, const std::filesystem::path& path);
ScalarField ReadFieldCsv(const std::filesystem::path& path);

/// Binary dump, little endian: uint64 N; per axis {float64 lower, float64
/// upper, uint64 nodes}; then the node values as float64 in linear order.
void WriteFieldBinary(const ScalarField& field, const std::filesystem::path& path);
ScalarField ReadFieldBinary(const std::filesystem::path& path);

}  // namespace asclf
