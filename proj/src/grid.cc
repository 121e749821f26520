#include "asclf/grid.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace asclf {

Grid::Grid(VectorXd lower, VectorXd upper, VectorXi nodes, double rho)
    : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes)) {
  const Index n = lower_.size();
  if (n < 1 || upper_.size() != n || nodes_.size() != n) {
    throw DimensionError("grid bounds and node counts must have the same positive length");
  }
  if (!lower_.allFinite() || !upper_.allFinite()) throw PreconditionError("grid bounds must be finite");
  if ((nodes_.array() < 3).any()) throw PreconditionError("grid needs at least 3 nodes per axis");
  if ((upper_.array() <= lower_.array()).any()) {
    throw PreconditionError("grid upper bound must exceed lower bound on every axis");
  }
  spacing_ = (upper_ - lower_).array() / (nodes_.cast<double>().array() - 1.0);
  strides_.assign(static_cast<std::size_t>(n), 1);
  for (Index k = n - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * nodes_[k + 1];
  size_ = strides_[0] * nodes_[0];
  rho_ = rho < 0.0 ? 2.0 * spacing_.maxCoeff() : rho;
}

Grid Grid::OnBox(const Box& box, int nodes_per_axis, double rho) {
  return Grid(box.lower, box.upper, VectorXi::Constant(box.dim(), nodes_per_axis), rho);
}

VectorXi Grid::MultiIndex(Index i) const {
  VectorXi multi(dim());
  for (int k = 0; k < dim(); ++k) {
    multi[k] = static_cast<int>(i / strides_[k]);
    i %= strides_[k];
  }
  return multi;
}

Index Grid::Linear(const VectorXi& multi) const {
  Index i = 0;
  for (int k = 0; k < dim(); ++k) i += multi[k] * strides_[k];
  return i;
}

void Grid::Node(Index i, Eigen::Ref<VectorXd> out) const {
  for (int k = 0; k < dim(); ++k) {
    const Index ik = i / strides_[k];
    i %= strides_[k];
    // Hit the upper bound exactly on the last node.
    out[k] = ik == nodes_[k] - 1 ? upper_[k] : lower_[k] + static_cast<double>(ik) * spacing_[k];
  }
}

VectorXd Grid::Node(Index i) const {
  VectorXd x(dim());
  Node(i, x);
  return x;
}

bool Grid::OnBoundary(Index i) const {
  const VectorXi multi = MultiIndex(i);
  for (int k = 0; k < dim(); ++k) {
    if (multi[k] == 0 || multi[k] == nodes_[k] - 1) return true;
  }
  return false;
}

bool Grid::Contains(const Eigen::Ref<const VectorXd>& x) const {
  return x.allFinite() && (x.array() >= lower_.array()).all() &&
         (x.array() <= upper_.array()).all();
}

Index Grid::NearestNode(const Eigen::Ref<const VectorXd>& x) const {
  Index i = 0;
  for (int k = 0; k < dim(); ++k) {
    const double t = std::round((x[k] - lower_[k]) / spacing_[k]);
    const Index ik = std::clamp<Index>(static_cast<Index>(std::isfinite(t) ? t : 0.0), 0,
                                       nodes_[k] - 1);
    i += ik * strides_[k];
  }
  return i;
}

Grid::Stencil Grid::Locate(const Eigen::Ref<const VectorXd>& x) const {
  Stencil s;
  if (!Contains(x)) return s;
  const int n = dim();
  std::vector<Index> base(static_cast<std::size_t>(n));
  std::vector<double> frac(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = (x[k] - lower_[k]) / spacing_[k];
    const Index cell = std::clamp<Index>(static_cast<Index>(std::floor(t)), 0, nodes_[k] - 2);
    base[k] = cell;
    frac[k] = std::clamp(t - static_cast<double>(cell), 0.0, 1.0);
  }
  const int corners = 1 << n;
  s.index.resize(static_cast<std::size_t>(corners));
  s.weight.resize(static_cast<std::size_t>(corners));
  for (int c = 0; c < corners; ++c) {
    Index idx = 0;
    double w = 1.0;
    for (int k = 0; k < n; ++k) {
      const bool up = (c >> k) & 1;
      idx += (base[k] + (up ? 1 : 0)) * strides_[k];
      w *= up ? frac[k] : 1.0 - frac[k];
    }
    s.index[c] = idx;
    s.weight[c] = w;
  }
  s.inside = true;
  return s;
}

std::optional<double> Grid::Interpolate(const VectorXd& values,
                                        const Eigen::Ref<const VectorXd>& x) const {
  const Stencil s = Locate(x);
  if (!s.inside) return std::nullopt;
  double v = 0.0;
  for (std::size_t c = 0; c < s.index.size(); ++c) v += s.weight[c] * values[s.index[c]];
  return v;
}

bool Grid::operator==(const Grid& other) const {
  return lower_ == other.lower_ && upper_ == other.upper_ && nodes_ == other.nodes_;
}

ScalarField::ScalarField(Grid g, VectorXd v, std::string n)
    : grid(std::move(g)), values(std::move(v)), name(std::move(n)) {
  if (values.size() != grid.size()) {
    throw DimensionError("field has " + std::to_string(values.size()) + " values for " +
                         std::to_string(grid.size()) + " nodes");
  }
}

ScalarField ScalarField::Sample(const Grid& grid, const CandidateFunction& f, std::string name) {
  VectorXd values(grid.size());
  VectorXd x(grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    grid.Node(i, x);
    values[i] = f.Value(x);
  }
  return ScalarField(grid, std::move(values), std::move(name));
}

// ---------------------------------------------------------------------------
// Serialization

void WriteFieldCsv(const ScalarField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int n = field.grid.dim();
  for (int k = 0; k < n; ++k) out << "x" << (k + 1) << ",";
  out << field.name << "\n";
  out.precision(17);
  VectorXd x(n);
  for (Index i = 0; i < field.grid.size(); ++i) {
    field.grid.Node(i, x);
    for (int k = 0; k < n; ++k) out << x[k] << ",";
    out << field.values[i] << "\n";
  }
}

ScalarField ReadFieldCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string header;
  std::getline(in, header);
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  const int n = static_cast<int>(columns) - 1;
  if (n < 1) throw DimensionError("field CSV needs at least one coordinate column");
  const std::string name = header.substr(header.rfind(',') + 1);
  std::vector<std::set<double>> coords(static_cast<std::size_t>(n));
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    for (int k = 0; k <= n; ++k) {
      if (!std::getline(row, cell, ',')) throw DimensionError("short row in field CSV");
      const double v = std::stod(cell);
      if (k < n) {
        coords[k].insert(v);
      } else {
        values.push_back(v);
      }
    }
  }
  VectorXd lower(n), upper(n);
  VectorXi nodes(n);
  for (int k = 0; k < n; ++k) {
    lower[k] = *coords[k].begin();
    upper[k] = *coords[k].rbegin();
    nodes[k] = static_cast<int>(coords[k].size());
  }
  Grid grid(lower, upper, nodes);
  return ScalarField(grid, Eigen::Map<VectorXd>(values.data(), static_cast<Index>(values.size())),
                     name);
}

namespace {

template <typename T>
void WriteLe(std::ostream& out, T v) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T ReadLe(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 8);
  if (!in) throw std::runtime_error("truncated binary field");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void WriteFieldBinary(const ScalarField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const Grid& g = field.grid;
  WriteLe<std::uint64_t>(out, static_cast<std::uint64_t>(g.dim()));
  for (int k = 0; k < g.dim(); ++k) {
    WriteLe<double>(out, g.lower()[k]);
    WriteLe<double>(out, g.upper()[k]);
    WriteLe<std::uint64_t>(out, static_cast<std::uint64_t>(g.nodes()[k]));
  }
  for (Index i = 0; i < g.size(); ++i) WriteLe<double>(out, field.values[i]);
}

ScalarField ReadFieldBinary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto n = static_cast<int>(ReadLe<std::uint64_t>(in));
  if (n < 1 || n > 16) throw DimensionError("implausible dimension in binary field");
  VectorXd lower(n), upper(n);
  VectorXi nodes(n);
  for (int k = 0; k < n; ++k) {
    lower[k] = ReadLe<double>(in);
    upper[k] = ReadLe<double>(in);
    nodes[k] = static_cast<int>(ReadLe<std::uint64_t>(in));
  }
  Grid grid(lower, upper, nodes);
  VectorXd values(grid.size());
  for (Index i = 0; i < grid.size(); ++i) values[i] = ReadLe<double>(in);
  return ScalarField(grid, std::move(values));
}

}  // namespace asclf
