#include "asclf/verifier.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asclf/parallel.h"

namespace asclf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool Tangential(const VectorXd& sigma_t_p, double p_norm, double sigma_norm, double eps_tan) {
  return sigma_t_p.norm() <= eps_tan * p_norm * std::max(1.0, sigma_norm);
}

double DefaultTol(const Grid& grid, double p_norm, double y_norm, const HamiltonianValue& h) {
  const double step = grid.max_spacing();
  return 10.0 * step * step * (1.0 + p_norm * h.drift_scale + y_norm * h.diffusion_scale);
}

double Rho(const Grid& grid, const VerifierOptions& options) {
  return options.rho.value_or(grid.rho());
}

// Supersolution verdict at one node from a jet.
NodeVerdict HjbVerdict(const ControlledDiffusion& model, const JetSource& v, const Grid& grid,
                       Index node, const VectorXd& x, const GaugeFunction* l,
                       const VerifierOptions& options) {
  NodeVerdict out;
  out.node = node;
  out.x = x;
  const Jet jet = v.JetAt(grid, node);
  if (!jet.finite) {
    out.checked = false;
    out.flag = "non-finite derivative";
    return out;
  }
  if (jet.one_sided) out.flag = "one-sided";
  const double p_norm = jet.gradient.norm();
  const HamiltonianValue h = EvaluateHamiltonian(model, x, jet.gradient, jet.hessian, options.eps_tan);
  const double lx = l == nullptr ? 0.0 : (*l)(x);
  out.tol = options.tol.value_or(DefaultTol(grid, p_norm, jet.hessian.norm(), h));
  out.witness = h.witness;
  out.tangency_residual = h.tangency_residual;
  if (h.witness < 0) {
    out.margin = kNegInf;
    out.pass = false;
    out.flag = "no tangential control";
  } else {
    out.margin = h.value - lx;
    out.pass = out.margin >= -out.tol;
  }
  if (options.crosscheck) {
    double mismatch = 0.0;
    if (v.CrossCheck(grid, node, jet, &mismatch) && !(mismatch <= options.nonsmooth_threshold)) {
      out.flag += out.flag.empty() ? "nonsmooth" : ";nonsmooth";
    }
  }
  return out;
}

std::vector<Index> NodesOutside(const Grid& grid, double rho) {
  std::vector<Index> out;
  VectorXd x(grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    grid.Node(i, x);
    if (x.norm() > rho) out.push_back(i);
  }
  return out;
}

}  // namespace

void VerificationReport::Summarize() {
  VerificationSummary s;
  s.excluded = summary.excluded;
  s.worst_margin = std::numeric_limits<double>::infinity();
  for (const NodeVerdict& n : nodes) {
    if (n.flag.find("nonsmooth") != std::string::npos) ++s.nonsmooth;
    if (!n.checked) {
      ++s.nonfinite;
      continue;
    }
    if (n.inconclusive) {
      ++s.inconclusive;
      continue;
    }
    ++s.checked;
    s.worst_margin = std::min(s.worst_margin, n.margin);
    if (n.pass) {
      ++s.passed;
    } else {
      ++s.failed;
      s.failing_nodes.push_back(n.node);
    }
  }
  if (s.checked == 0) s.worst_margin = 0.0;
  summary = std::move(s);
}

std::vector<int> TangentialControls(const ControlledDiffusion& model,
                                    const Eigen::Ref<const VectorXd>& x,
                                    const Eigen::Ref<const VectorXd>& p, double eps_tan) {
  const double p_norm = p.norm();
  if (!(p_norm > 0.0)) throw PreconditionError("tangential controls need |p| > 0");
  std::vector<int> out;
  MatrixXd sigma(model.state_dim(), model.noise_dim());
  for (int c = 0; c < model.num_controls(); ++c) {
    model.Diffusion(x, c, sigma);
    if (Tangential(sigma.transpose() * p, p_norm, sigma.norm(), eps_tan)) out.push_back(c);
  }
  return out;
}

HamiltonianValue EvaluateHamiltonian(const ControlledDiffusion& model,
                                     const Eigen::Ref<const VectorXd>& x,
                                     const Eigen::Ref<const VectorXd>& p,
                                     const Eigen::Ref<const MatrixXd>& y, double eps_tan) {
  HamiltonianValue out;
  out.value = kNegInf;
  out.tangency_residual = std::numeric_limits<double>::infinity();
  const int n = model.state_dim();
  const double p_norm = p.norm();
  VectorXd f(n);
  MatrixXd sigma(n, model.noise_dim());
  for (int c = 0; c < model.num_controls(); ++c) {
    model.Drift(x, c, f);
    model.Diffusion(x, c, sigma);
    const MatrixXd a = 0.5 * (sigma * sigma.transpose());
    out.drift_scale = std::max(out.drift_scale, f.norm());
    out.diffusion_scale = std::max(out.diffusion_scale, a.norm());
    const VectorXd stp = sigma.transpose() * p;
    const double residual = stp.norm();
    if (!Tangential(stp, p_norm, sigma.norm(), eps_tan)) {
      if (out.witness < 0) out.tangency_residual = std::min(out.tangency_residual, residual);
      continue;
    }
    const double m = -p.dot(f) - (a.cwiseProduct(y)).sum();
    // Strict comparison keeps the lowest index on ties.
    if (out.witness < 0 || m > out.value) {
      out.value = m;
      out.witness = c;
      out.tangency_residual = residual;
    }
  }
  return out;
}

VerificationReport CheckSupersolution(const ControlledDiffusion& model, const JetSource& v,
                                      const Grid& grid, const GaugeFunction* l,
                                      const VerifierOptions& options) {
  if (grid.dim() != model.state_dim()) throw DimensionError("grid and model dimensions differ");
  const std::vector<Index> nodes = NodesOutside(grid, Rho(grid, options));
  VerificationReport report;
  report.name = "supersolution";
  report.nodes.resize(nodes.size());
  ParallelFor(static_cast<Index>(nodes.size()), options.workers, [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      const Index i = nodes[k];
      report.nodes[k] = HjbVerdict(model, v, grid, i, grid.Node(i), l, options);
    }
  });
  report.summary.excluded = static_cast<int>(grid.size() - static_cast<Index>(nodes.size()));
  report.Summarize();
  return report;
}

VerificationReport CheckSupersolution(const ControlledDiffusion& model,
                                      const CandidateFunction& v, const Grid& grid,
                                      const GaugeFunction* l, const VerifierOptions& options) {
  return CheckSupersolution(model, CandidateJets(v), grid, l, options);
}

VerificationReport RadialSufficientCheck(const ControlledDiffusion& model, const Grid& grid,
                                         const VerifierOptions& options) {
  if (grid.dim() != model.state_dim()) throw DimensionError("grid and model dimensions differ");
  const std::vector<Index> nodes = NodesOutside(grid, Rho(grid, options));
  VerificationReport report;
  report.name = "radial";
  report.nodes.resize(nodes.size());
  const int n = model.state_dim();
  ParallelFor(static_cast<Index>(nodes.size()), options.workers, [&](Index begin, Index end) {
    VectorXd f(n);
    MatrixXd sigma(n, model.noise_dim());
    for (Index k = begin; k < end; ++k) {
      NodeVerdict& out = report.nodes[k];
      out.node = nodes[k];
      out.x = grid.Node(out.node);
      const VectorXd& x = out.x;
      out.margin = kNegInf;
      out.tangency_residual = std::numeric_limits<double>::infinity();
      double scale = 0.0;
      for (int c = 0; c < model.num_controls(); ++c) {
        model.Drift(x, c, f);
        model.Diffusion(x, c, sigma);
        scale = std::max(scale, std::abs(f.dot(x)) + 0.5 * sigma.squaredNorm());
        const VectorXd stx = sigma.transpose() * x;
        if (!Tangential(stx, x.norm(), sigma.norm(), options.eps_tan)) {
          if (out.witness < 0) out.tangency_residual = std::min(out.tangency_residual, stx.norm());
          continue;
        }
        const double m = -(f.dot(x) + 0.5 * sigma.squaredNorm());
        if (out.witness < 0 || m > out.margin) {
          out.margin = m;
          out.witness = c;
          out.tangency_residual = stx.norm();
        }
      }
      const double h = grid.max_spacing();
      out.tol = options.tol.value_or(10.0 * h * h * (1.0 + scale));
      if (out.witness < 0) out.flag = "no tangential control";
      out.pass = out.witness >= 0 && out.margin >= -out.tol;
    }
  });
  report.summary.excluded = static_cast<int>(grid.size() - static_cast<Index>(nodes.size()));
  report.Summarize();
  return report;
}

InvarianceResult CheckGeometricInvariance(const ControlledDiffusion& model,
                                          const Eigen::Ref<const VectorXd>& x,
                                          const Eigen::Ref<const VectorXd>& p,
                                          const Eigen::Ref<const MatrixXd>& y, double lambda,
                                          double mu, double eps_tan) {
  if (!(lambda > 0.0)) throw PreconditionError("rescaling needs lambda > 0");
  const VectorXd p2 = lambda * p;
  const MatrixXd y2 = lambda * y + mu * p * p.transpose();
  const HamiltonianValue h1 = EvaluateHamiltonian(model, x, p, y, eps_tan);
  const HamiltonianValue h2 = EvaluateHamiltonian(model, x, p2, y2, eps_tan);
  InvarianceResult out;
  out.f1 = h1.value;
  out.f2 = h2.value;
  out.empty1 = h1.witness < 0;
  out.empty2 = h2.witness < 0;
  if (out.empty1 && out.empty2) {
    out.residual = 0.0;
  } else if (out.empty1 != out.empty2) {
    out.residual = std::numeric_limits<double>::infinity();
  } else {
    out.residual = std::abs(out.f2 - lambda * out.f1);
  }
  return out;
}

ChangeOfUnknownResult CheckChangeOfUnknown(const ControlledDiffusion& model, const JetSource& v,
                                           const Expression& phi, const Grid& grid,
                                           const VerifierOptions& options) {
  const ComposedJets composed(v, phi);
  for (Index i : NodesOutside(grid, Rho(grid, options))) {
    const double t = v.ValueAt(grid, i);
    if (!(composed.Derivative(t) > 0.0)) {
      throw PreconditionError("phi' <= 0 at V = " + std::to_string(t));
    }
  }
  ChangeOfUnknownResult out;
  out.original = CheckSupersolution(model, v, grid, nullptr, options);
  out.composed = CheckSupersolution(model, composed, grid, nullptr, options);
  out.composed.name = "supersolution(phi o V)";
  for (std::size_t k = 0; k < out.original.nodes.size(); ++k) {
    const NodeVerdict& a = out.original.nodes[k];
    const NodeVerdict& b = out.composed.nodes[k];
    if (!a.checked || !b.checked) continue;
    if (a.pass == b.pass) {
      ++out.agree;
    } else {
      ++out.disagree;
      if (std::abs(a.margin) <= a.tol || std::abs(b.margin) <= b.tol) ++out.disagree_near_boundary;
    }
  }
  return out;
}

VerificationReport CheckViabilityBoundary(const ControlledDiffusion& model, const JetSource& v,
                                          const Grid& grid, double level,
                                          const VerifierOptions& options) {
  if (grid.dim() != model.state_dim()) throw DimensionError("grid and model dimensions differ");
  const LevelSet set = ExtractLevelSet(v, grid, level);
  VerificationReport report;
  report.name = "viability";
  report.nodes.resize(set.nodes.size());
  const int n = model.state_dim();
  ParallelFor(static_cast<Index>(set.nodes.size()), options.workers, [&](Index begin, Index end) {
    VectorXd f(n);
    MatrixXd sigma(n, model.noise_dim());
    for (Index k = begin; k < end; ++k) {
      NodeVerdict& out = report.nodes[k];
      out.node = set.nodes[k];
      out.x = grid.Node(out.node);
      const VectorXd& p = set.normal[k];
      const MatrixXd& y = set.curvature[k];
      out.margin = kNegInf;
      out.tangency_residual = std::numeric_limits<double>::infinity();
      double scale = 0.0;
      for (int c = 0; c < model.num_controls(); ++c) {
        model.Drift(out.x, c, f);
        model.Diffusion(out.x, c, sigma);
        const MatrixXd a = 0.5 * (sigma * sigma.transpose());
        scale = std::max(scale, f.norm() + y.norm() * a.norm());
        const VectorXd stp = sigma.transpose() * p;
        if (!Tangential(stp, 1.0, sigma.norm(), options.eps_tan)) {
          if (out.witness < 0) out.tangency_residual = std::min(out.tangency_residual, stp.norm());
          continue;
        }
        const double m = f.dot(p) + a.cwiseProduct(y).sum();
        if (out.witness < 0 || m > out.margin) {
          out.margin = m;
          out.witness = c;
          out.tangency_residual = stp.norm();
        }
      }
      const double h = grid.max_spacing();
      out.tol = options.tol.value_or(10.0 * h * h * (1.0 + scale));
      if (out.witness < 0) out.flag = "no tangential control";
      out.pass = out.witness >= 0 && out.margin >= -out.tol;
      if (set.on_grid_edge[k]) {
        out.inconclusive = true;
        out.flag = "grid edge";
      }
    }
  });
  report.Summarize();
  return report;
}

VerificationReport CheckSetLyapunov(const ControlledDiffusion& model, const JetSource& v,
                                    const Expression& distance, const GaugeFunction& gamma1,
                                    const GaugeFunction& gamma2, const Grid& grid,
                                    const GaugeFunction* l, const VerifierOptions& options) {
  if (grid.dim() != model.state_dim()) throw DimensionError("grid and model dimensions differ");
  if (distance.MaxSlot() >= model.state_dim()) throw DimensionError("distance references unknown slot");
  for (const GaugeFunction* g : {&gamma1, &gamma2}) {
    if (!g->is_radial() || !g->IsMonotone()) throw PreconditionError("sandwich gauges must be monotone radial");
    if (g->AtRadius(0.0) != 0.0) throw PreconditionError("sandwich gauges must vanish at 0");
  }
  const CompiledExpression dist(distance);
  const double rho = Rho(grid, options);
  VerificationReport report;
  report.name = "set-lyapunov";
  report.nodes.resize(static_cast<std::size_t>(grid.size()));
  ParallelFor(grid.size(), options.workers, [&](Index begin, Index end) {
    VectorXd x(grid.dim());
    for (Index i = begin; i < end; ++i) {
      grid.Node(i, x);
      const double d = dist(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
      const double value = v.ValueAt(grid, i);
      const double h = grid.max_spacing();
      const double sandwich_tol = options.tol.value_or(10.0 * h * h * (1.0 + std::abs(value)));
      const double lower = value - gamma2.AtRadius(d);
      const double upper = gamma1.AtRadius(d) - value;
      NodeVerdict out;
      if (d > rho) {
        out = HjbVerdict(model, v, grid, i, x, l, options);
      } else {
        out.node = i;
        out.x = x;
        out.pass = true;
        out.margin = std::numeric_limits<double>::infinity();
        out.tol = sandwich_tol;
        out.flag = "near target";
      }
      if (!std::isfinite(d) || !std::isfinite(value)) {
        out.checked = false;
        out.flag = "non-finite value";
      }
      const double sandwich = std::min(lower, upper);
      if (sandwich < -sandwich_tol) {
        out.pass = false;
        out.flag += out.flag.empty() ? "sandwich" : ";sandwich";
      }
      out.margin = std::min(out.margin, sandwich);
      report.nodes[static_cast<std::size_t>(i)] = std::move(out);
    }
  });
  report.Summarize();
  double face_min = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < grid.size(); ++i) {
    if (grid.OnBoundary(i)) face_min = std::min(face_min, v.ValueAt(grid, i));
  }
  report.boundary_min_value = face_min;
  return report;
}

}  // namespace asclf
