#include "asclf/stochastic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "asclf/parallel.h"

namespace asclf {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct PathOutput {
  PathStats stats;
  std::vector<double> envelope;
  std::vector<PathSample> samples;
};

PathOutput SimulatePath(const ControlledDiffusion& model, const ControlSource& control,
                        const VectorXd& x0, const SimulationOptions& options,
                        const CompiledExpression* distance, int steps, int envelope_stride,
                        int path) {
  const int n = model.state_dim();
  const int m = model.noise_dim();
  const double dt = options.dt;
  const double sqrt_dt = std::sqrt(dt);
  const std::size_t nr = options.radii.size();
  const std::optional<Box>& domain = model.domain();

  std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                    static_cast<std::uint32_t>(options.seed >> 32),
                    static_cast<std::uint32_t>(path)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin;

  PathOutput out;
  PathStats& s = out.stats;
  s.time_outside.assign(nr, 0.0);
  s.ends_outside.assign(nr, false);
  out.envelope.assign(static_cast<std::size_t>(steps / envelope_stride) + 1, kNaN);

  VectorXd x = x0;
  VectorXd f(n);
  MatrixXd sigma(n, m);
  VectorXd w(m);
  const auto dist = [&](const VectorXd& y) {
    return (*distance)(std::span<const double>(y.data(), static_cast<std::size_t>(n)));
  };
  const double v0 = options.v != nullptr ? options.v->RawValue(x) : 0.0;
  double integral = 0.0;
  s.sup_radius = x.norm();
  s.sup_v = v0;
  if (distance != nullptr) s.sup_distance = dist(x);
  out.envelope[0] = s.sup_radius;
  const bool thin = options.thin_stride > 0 && path < options.thin_paths;
  if (thin) out.samples.push_back({path, 0.0, x});

  for (int k = 0; k < steps; ++k) {
    const double r = x.norm();
    for (std::size_t i = 0; i < nr; ++i) {
      if (r > options.radii[i]) s.time_outside[i] += dt;
    }
    if (options.l != nullptr) integral += (*options.l)(x) * dt;

    const int a = control.At(x);
    model.Drift(x, a, f);
    model.Diffusion(x, a, sigma);
    if (options.increments == IncrementMode::kGaussian) {
      for (int j = 0; j < m; ++j) w[j] = sqrt_dt * normal(rng);
    } else {
      for (int j = 0; j < m; ++j) w[j] = coin(rng) ? sqrt_dt : -sqrt_dt;
    }
    x.noalias() += dt * f;
    x.noalias() += sigma * w;
    const double t = (k + 1) * dt;

    if (!x.allFinite() || (domain && !domain->Contains(x))) {
      s.exited = true;
      s.exit_time = t;
      break;
    }
    const double radius = x.norm();
    s.sup_radius = std::max(s.sup_radius, radius);
    if (options.v != nullptr) {
      const double v = options.v->RawValue(x);
      s.sup_v = std::max(s.sup_v, v);
      const double excess = v + integral - v0;
      if (excess > s.excess) {
        s.excess = excess;
        s.excess_time = t;
      }
    }
    if (distance != nullptr) s.sup_distance = std::max(s.sup_distance, dist(x));
    if ((k + 1) % envelope_stride == 0) out.envelope[static_cast<std::size_t>((k + 1) / envelope_stride)] = radius;
    if (thin && (k + 1) % options.thin_stride == 0) out.samples.push_back({path, t, x});
  }
  s.integral_l = integral;
  s.final_state = x;
  s.final_radius = x.norm();
  for (std::size_t i = 0; i < nr; ++i) s.ends_outside[i] = s.exited || s.final_radius > options.radii[i];
  return out;
}

}  // namespace

std::string ToString(IncrementMode mode) {
  return mode == IncrementMode::kGaussian ? "gaussian" : "bernoulli";
}

IncrementMode ParseIncrementMode(const std::string& text) {
  if (text == "gaussian") return IncrementMode::kGaussian;
  if (text == "bernoulli" || text == "signed-bernoulli") return IncrementMode::kSignedBernoulli;
  throw PreconditionError("unknown increment mode '" + text + "'");
}

int TrajectoryEnsemble::exited() const {
  return static_cast<int>(std::count_if(paths.begin(), paths.end(), [](const PathStats& p) { return p.exited; }));
}

double TrajectoryEnsemble::max_sup_radius() const {
  double best = 0.0;
  for (const PathStats& p : paths) best = std::max(best, p.sup_radius);
  return best;
}

double TrajectoryEnsemble::max_excess() const {
  double best = 0.0;
  for (const PathStats& p : paths) best = std::max(best, p.excess);
  return best;
}

TrajectoryEnsemble SimulateEnsemble(const ControlledDiffusion& model, const ControlSource& control,
                                    const Eigen::Ref<const VectorXd>& x0,
                                    const SimulationOptions& options) {
  if (!(options.dt > 0.0)) throw PreconditionError("dt must be positive");
  if (!(options.horizon > 0.0)) throw PreconditionError("horizon must be positive");
  if (options.paths < 1) throw PreconditionError("need at least one path");
  if (x0.size() != model.state_dim()) throw DimensionError("initial state has wrong dimension");
  if (control.feedback == nullptr && (control.fixed < 0 || control.fixed >= model.num_controls())) {
    throw PreconditionError("control index out of range");
  }
  if (options.v != nullptr && options.v->state_dim() != model.state_dim()) {
    throw DimensionError("candidate dimension differs from the model");
  }
  std::optional<CompiledExpression> distance;
  if (options.distance) {
    if (options.distance->MaxSlot() >= model.state_dim()) throw DimensionError("distance references unknown slot");
    distance.emplace(*options.distance);
  }

  TrajectoryEnsemble out;
  out.x0 = x0;
  out.dt = options.dt;
  out.horizon = options.horizon;
  out.steps = static_cast<int>(std::llround(options.horizon / options.dt));
  out.seed = options.seed;
  out.increments = options.increments;
  out.control = control.feedback != nullptr ? "feedback" : model.controls()[control.fixed].label;
  out.radii = options.radii;
  out.has_v = options.v != nullptr;
  out.has_l = options.l != nullptr;
  out.v0 = out.has_v ? options.v->RawValue(x0) : 0.0;
  const int samples = std::clamp(options.envelope_samples, 1, std::max(1, out.steps));
  const int stride = std::max(1, out.steps / samples);

  const VectorXd start = x0;
  std::vector<PathOutput> results(static_cast<std::size_t>(options.paths));
  ParallelFor(options.paths, options.workers, [&](Index begin, Index end) {
    for (Index p = begin; p < end; ++p) {
      results[static_cast<std::size_t>(p)] =
          SimulatePath(model, control, start, options, distance ? &*distance : nullptr, out.steps,
                       stride, static_cast<int>(p));
    }
  });

  const std::size_t ns = static_cast<std::size_t>(out.steps / stride) + 1;
  out.envelope_time.resize(ns);
  out.envelope_radius.assign(ns, 0.0);
  for (std::size_t j = 0; j < ns; ++j) out.envelope_time[j] = static_cast<double>(j * stride) * options.dt;
  out.paths.reserve(results.size());
  for (PathOutput& r : results) {
    for (std::size_t j = 0; j < ns; ++j) {
      if (!std::isnan(r.envelope[j])) out.envelope_radius[j] = std::max(out.envelope_radius[j], r.envelope[j]);
    }
    out.paths.push_back(std::move(r.stats));
    for (PathSample& s : r.samples) out.samples.push_back(std::move(s));
  }
  return out;
}

double ComparisonGauge::operator()(double r, double t) const {
  const double g = gamma.AtRadius(r);
  return cls == Class::kKL ? g * std::exp(-kappa * t) : g;
}

bool ComparisonGauge::SatisfiesClass() const {
  if (gamma.kind() != GaugeFunction::Kind::kKnots) return false;
  const auto& r = gamma.knot_radii();
  const auto& v = gamma.knot_values();
  if (r.empty() || r.front() != 0.0 || v.front() != 0.0) return false;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] > v[k - 1]) || !std::isfinite(v[k])) return false;
  }
  if (cls == Class::kKL) return kappa > 0.0 && std::isfinite(kappa);
  return true;
}

namespace {

// Cumulative max over ascending radii, nudged to be strictly increasing and
// anchored at (0, 0).
GaugeFunction StrictEnvelope(const std::vector<double>& radii, const std::vector<double>& values) {
  std::vector<double> knots_r{0.0};
  std::vector<double> knots_v{0.0};
  double level = 0.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] <= 0.0) continue;
    level = std::max(level, values[k]);
    const double prev = knots_v.back();
    const double v = std::max(level, prev + 1e-12 * std::max(1.0, prev));
    knots_r.push_back(radii[k]);
    knots_v.push_back(v);
    level = v;
  }
  if (knots_r.size() == 1) {
    knots_r.push_back(1.0);
    knots_v.push_back(1e-12);
  }
  return GaugeFunction::PiecewiseLinear(knots_r, knots_v);
}

}  // namespace

StabilizabilityEstimate EstimateStabilizabilityGauge(const std::vector<TrajectoryEnsemble>& ensembles,
                                                     double zero_tol) {
  if (ensembles.empty()) throw PreconditionError("need at least one ensemble");
  StabilizabilityEstimate out;
  std::map<double, double> by_radius;
  for (std::size_t e = 0; e < ensembles.size(); ++e) {
    const TrajectoryEnsemble& ens = ensembles[e];
    if (ens.exited() > 0 && out.exit_witness < 0) out.exit_witness = static_cast<int>(e);
    double& g = by_radius[ens.x0.norm()];
    g = std::max(g, ens.max_sup_radius());
  }
  for (const auto& [r, g] : by_radius) {
    out.radii.push_back(r);
    out.sup_radius.push_back(g);
  }
  out.gauge.cls = ComparisonGauge::Class::kK;
  out.gauge.gamma = StrictEnvelope(out.radii, out.sup_radius);

  if (out.radii.front() == 0.0) {
    out.intercept = out.sup_radius.front();
  } else if (out.radii.size() >= 2) {
    const double r1 = out.radii[0], r2 = out.radii[1];
    const double g1 = out.sup_radius[0], g2 = out.sup_radius[1];
    out.intercept = g1 - r1 * (g2 - g1) / (r2 - r1);
  }
  const bool finite = std::all_of(out.sup_radius.begin(), out.sup_radius.end(),
                                  [](double g) { return std::isfinite(g); });
  if (out.exit_witness >= 0) {
    out.reason = "paths left the domain from initial state #" + std::to_string(out.exit_witness);
  } else if (!finite) {
    out.reason = "non-finite sup radius";
  } else if (std::abs(out.intercept) > zero_tol) {
    out.reason = "sup radius does not vanish as r -> 0 (intercept " + std::to_string(out.intercept) + ")";
  } else {
    out.consistent = true;
    out.reason = "consistent with almost-sure stabilizability";
  }
  return out;
}

DecayEstimate EstimateDecayEnvelope(const std::vector<TrajectoryEnsemble>& ensembles, double kappa_tol) {
  if (ensembles.empty()) throw PreconditionError("need at least one ensemble");
  DecayEstimate out;
  // Pooled regression with one intercept per ensemble.
  double sxy = 0.0, sxx = 0.0;
  bool any_exit = false;
  for (const TrajectoryEnsemble& ens : ensembles) {
    any_exit = any_exit || ens.exited() > 0;
    std::vector<double> t, y;
    for (std::size_t j = 0; j < ens.envelope_time.size(); ++j) {
      const double r = ens.envelope_radius[j];
      if (r > 0.0 && std::isfinite(r)) {
        t.push_back(ens.envelope_time[j]);
        y.push_back(std::log(r));
      }
    }
    if (t.size() < 2) continue;
    double tm = 0.0, ym = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      tm += t[j];
      ym += y[j];
    }
    tm /= static_cast<double>(t.size());
    ym /= static_cast<double>(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      sxy += (t[j] - tm) * (y[j] - ym);
      sxx += (t[j] - tm) * (t[j] - tm);
    }
  }
  out.kappa = sxx > 0.0 ? -sxy / sxx : 0.0;

  std::vector<double> radii, gamma;
  double growth = 0.0;
  double final_ratio = 0.0;
  for (const TrajectoryEnsemble& ens : ensembles) {
    const double r0 = ens.x0.norm();
    double g = 0.0;
    for (std::size_t j = 0; j < ens.envelope_time.size(); ++j) {
      g = std::max(g, ens.envelope_radius[j] * std::exp(out.kappa * ens.envelope_time[j]));
    }
    radii.push_back(r0);
    gamma.push_back(g);
    if (r0 > 0.0) {
      double sup = 0.0;
      for (double r : ens.envelope_radius) sup = std::max(sup, r);
      growth = std::max(growth, sup / r0);
      final_ratio = std::max(final_ratio, ens.envelope_radius.back() / r0);
    }
  }
  std::vector<std::size_t> order(radii.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  std::vector<double> rs, gs;
  for (std::size_t k : order) {
    if (!rs.empty() && rs.back() == radii[k]) {
      gs.back() = std::max(gs.back(), gamma[k]);
    } else {
      rs.push_back(radii[k]);
      gs.push_back(gamma[k]);
    }
  }
  out.beta.cls = ComparisonGauge::Class::kKL;
  out.beta.kappa = out.kappa;
  out.beta.gamma = StrictEnvelope(rs, gs);

  out.envelope_holds = true;
  for (const TrajectoryEnsemble& ens : ensembles) {
    const double r0 = ens.x0.norm();
    for (std::size_t j = 0; j < ens.envelope_time.size(); ++j) {
      const double bound = out.beta(r0, ens.envelope_time[j]);
      if (ens.envelope_radius[j] > bound * (1.0 + 1e-9)) out.envelope_holds = false;
    }
  }
  out.stable = !any_exit && growth <= 2.0;
  out.asymptotic = !any_exit && out.kappa > kappa_tol && out.envelope_holds;
  if (any_exit) {
    out.reason = "paths left the domain";
  } else if (out.asymptotic) {
    out.reason = "consistent with almost-sure asymptotic stabilizability";
  } else if (!(out.kappa > kappa_tol)) {
    out.reason = final_ratio >= 0.5 ? "no decay: stable but not asymptotically"
                                    : "decay too slow for the horizon";
  } else {
    out.reason = "envelope violated";
  }
  return out;
}

bool OccupationTimes::any_censored() const {
  return std::any_of(censored.begin(), censored.end(), [](bool c) { return c; });
}

OccupationTimes MeasureOccupationTimes(const std::vector<TrajectoryEnsemble>& ensembles,
                                       const std::vector<double>& radii) {
  if (ensembles.empty()) throw PreconditionError("need at least one ensemble");
  OccupationTimes out;
  out.radii = radii;
  out.raw.assign(radii.size(), 0.0);
  out.censored.assign(radii.size(), false);
  for (const TrajectoryEnsemble& ens : ensembles) {
    if (ens.radii != radii) throw PreconditionError("ensemble was simulated with different radii");
    for (const PathStats& p : ens.paths) {
      for (std::size_t i = 0; i < radii.size(); ++i) {
        out.raw[i] = std::max(out.raw[i], p.time_outside[i]);
        if (p.ends_outside[i]) out.censored[i] = true;
      }
    }
  }
  out.times = out.raw;
  for (std::size_t i = 1; i < out.times.size(); ++i) out.times[i] = std::max(out.times[i], out.times[i - 1]);
  return out;
}

DecayGaugeConstruction BuildDecayGauge(const std::vector<double>& times, const std::vector<double>& radii) {
  if (times.empty() || times.size() != radii.size()) {
    throw DimensionError("need one occupation time per radius");
  }
  const std::size_t imax = times.size() - 1;
  for (std::size_t i = 0; i <= imax; ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw PreconditionError("occupation times must be finite and >= 0");
    if (!(radii[i] > 0.0)) throw PreconditionError("radii must be positive");
    if (i > 0 && times[i] < times[i - 1]) throw PreconditionError("occupation times must be nondecreasing");
    if (i > 0 && !(radii[i] < radii[i - 1])) throw PreconditionError("radii must decrease");
  }
  DecayGaugeConstruction out;
  out.radii = radii;
  out.times = times;
  const double slope = imax > 0 ? times[imax] - times[imax - 1] : 0.0;
  out.times.push_back(times[imax] + slope);
  out.weights.resize(out.times.size());
  for (std::size_t i = 0; i < out.times.size(); ++i) {
    out.weights[i] = std::ldexp(1.0, -static_cast<int>(i)) / std::max(out.times[i], 1.0);
    out.budget += out.weights[i] * out.times[i];
  }
  std::vector<double> knot_r{0.0};
  std::vector<double> knot_v{0.0};
  for (std::size_t k = 0; k <= imax; ++k) {
    const std::size_t i = imax - k;
    knot_r.push_back(radii[i]);
    knot_v.push_back(out.weights[i + 1]);
  }
  out.gauge = GaugeFunction::PiecewiseLinear(knot_r, knot_v);
  return out;
}

DecayGaugeConstruction BuildDecayGauge(const OccupationTimes& occupation) {
  for (std::size_t i = 0; i < occupation.censored.size(); ++i) {
    if (occupation.censored[i]) {
      throw PreconditionError("occupation time for r = " + std::to_string(occupation.radii[i]) +
                              " is horizon-censored; simulate with a longer horizon");
    }
  }
  return BuildDecayGauge(occupation.times, occupation.radii);
}

SupermaxingaleResult CheckSupermaxingale(const TrajectoryEnsemble& ensemble, double tol) {
  if (!ensemble.has_v) throw PreconditionError("ensemble was simulated without a candidate V");
  SupermaxingaleResult out;
  out.threshold = tol * (1.0 + ensemble.v0);
  out.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
    if (ensemble.paths[p].excess > out.worst_excess) {
      out.worst_excess = ensemble.paths[p].excess;
      out.worst_path = static_cast<int>(p);
      out.worst_time = ensemble.paths[p].excess_time;
    }
  }
  out.pass = out.worst_excess <= out.threshold;
  return out;
}

ViabilityEstimate EmpiricalViability(const TrajectoryEnsemble& ensemble, double level, double tol) {
  if (!ensemble.has_v) throw PreconditionError("ensemble was simulated without a candidate V");
  if (ensemble.v0 > level) throw PreconditionError("initial state lies outside the sublevel set");
  ViabilityEstimate out;
  int escaped = 0;
  for (const PathStats& p : ensemble.paths) {
    if (p.exited || p.sup_v > level * (1.0 + tol)) {
      ++escaped;
      out.excess.push_back(p.exited ? std::numeric_limits<double>::infinity() : p.sup_v - level);
    }
  }
  std::sort(out.excess.begin(), out.excess.end());
  out.escape_fraction = static_cast<double>(escaped) / static_cast<double>(ensemble.paths.size());
  return out;
}

}  // namespace asclf
