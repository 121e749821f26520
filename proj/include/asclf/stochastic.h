#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asclf/expression.h"
#include "asclf/gauge.h"
#include "asclf/model.h"
#include "asclf/value_engine.h"

namespace asclf {

enum class IncrementMode { kGaussian, kSignedBernoulli };

std::string ToString(IncrementMode mode);
/// "gaussian" or "bernoulli" (also "signed-bernoulli").
IncrementMode ParseIncrementMode(const std::string& text);

/// Control law used along paths: a fixed control index, or a feedback map
/// looked up at the nearest grid node.
struct ControlSource {
  int fixed = 0;
  const FeedbackMap* feedback = nullptr;

  int At(const Eigen::Ref<const VectorXd>& x) const {
    return feedback == nullptr ? fixed : feedback->At(x);
  }
};

struct SimulationOptions {
  double dt = 1e-3;
  double horizon = 10.0;
  int paths = 1;
  std::uint64_t seed = 0;
  IncrementMode increments = IncrementMode::kGaussian;
  int workers = 1;

  /// Optional monitors. V enables sup V and the supermaxingale excess; l the
  /// running integral; distance the running sup of d(X_t).
  const CandidateFunction* v = nullptr;
  const GaugeFunction* l = nullptr;
  std::optional<Expression> distance;
  /// Occupation thresholds: per path, time spent at |X_t| > r_i.
  std::vector<double> radii;
  /// Number of (t, max over paths |X_t|) samples kept for envelope fits.
  int envelope_samples = 100;
  /// Thinned path dump: every `thin_stride` steps of the first `thin_paths`
  /// paths; 0 disables.
  int thin_stride = 0;
  int thin_paths = 0;
};

struct PathStats {
  double sup_radius = 0.0;
  double final_radius = 0.0;
  VectorXd final_state;
  double integral_l = 0.0;
  double sup_v = 0.0;
  /// max_t V(X_t) + int_0^t l - V(x0), and the time it is attained.
  double excess = 0.0;
  double excess_time = 0.0;
  double sup_distance = 0.0;
  bool exited = false;
  double exit_time = 0.0;
  /// Time spent outside B_{r_i} and whether the path ends outside it.
  std::vector<double> time_outside;
  std::vector<bool> ends_outside;
};

struct PathSample {
  int path = 0;
  double t = 0.0;
  VectorXd x;
};

/// A batch of Euler-Maruyama paths from one initial state.
struct TrajectoryEnsemble {
  VectorXd x0;
  double dt = 0.0;
  double horizon = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
  IncrementMode increments = IncrementMode::kGaussian;
  std::string control;
  std::vector<double> radii;
  double v0 = 0.0;
  bool has_v = false;
  bool has_l = false;

  std::vector<PathStats> paths;
  /// Sample times and max over (non-exited) paths of |X_t| at those times.
  std::vector<double> envelope_time;
  std::vector<double> envelope_radius;
  std::vector<PathSample> samples;

  int exited() const;
  double max_sup_radius() const;
  double max_excess() const;
};

/// Path p draws from std::mt19937_64 seeded with seed_seq{seed, p}, so the
/// result is independent of the worker count. Paths leaving the model's
/// domain box (or turning non-finite) stop and are flagged exited.
TrajectoryEnsemble SimulateEnsemble(const ControlledDiffusion& model, const ControlSource& control,
                                    const Eigen::Ref<const VectorXd>& x0,
                                    const SimulationOptions& options);

/// A fitted comparison function. Class K / K-infinity gauges are the knot
/// gauge `gamma`; class KL adds the rate: beta(r, t) = gamma(r) exp(-kappa t).
struct ComparisonGauge {
  enum class Class { kK, kKInfinity, kKL };
  Class cls = Class::kK;
  GaugeFunction gamma = GaugeFunction::Zero();
  double kappa = 0.0;

  double operator()(double r, double t = 0.0) const;
  /// Strictly increasing knots, gamma(0) = 0, and kappa > 0 for KL.
  bool SatisfiesClass() const;
};

struct StabilizabilityEstimate {
  /// Distinct initial radii (ascending) and max over paths of sup |X_t|.
  std::vector<double> radii;
  std::vector<double> sup_radius;
  ComparisonGauge gauge;
  /// Linear extrapolation of the two smallest radii to r = 0.
  double intercept = 0.0;
  bool consistent = false;
  std::string reason;
  /// Index into the initial-state list of the first ensemble with an exit.
  int exit_witness = -1;
};

/// One ensemble per initial state; envelope = cumulative max over radii,
/// nudged to be strictly increasing. Verdict needs no exits, a finite
/// envelope and |intercept| <= zero_tol.
StabilizabilityEstimate EstimateStabilizabilityGauge(const std::vector<TrajectoryEnsemble>& ensembles,
                                                     double zero_tol = 1e-2);

struct DecayEstimate {
  ComparisonGauge beta;
  double kappa = 0.0;
  bool envelope_holds = false;
  bool asymptotic = false;
  /// Paths stay bounded by their initial radius times a constant.
  bool stable = false;
  std::string reason;
};

/// Pooled least squares on log(max radius) against t (common slope, one
/// intercept per ensemble) gives kappa; gamma(r) is the smallest value making
/// gamma(r) exp(-kappa t) dominate every sample.
DecayEstimate EstimateDecayEnvelope(const std::vector<TrajectoryEnsemble>& ensembles,
                                    double kappa_tol = 1e-3);

struct OccupationTimes {
  std::vector<double> radii;
  /// Raw max over paths and ensembles, then the cumulative max in i.
  std::vector<double> raw;
  std::vector<double> times;
  /// Some path ended outside B_{r_i}: T_i is only a lower bound.
  std::vector<bool> censored;
  bool any_censored() const;
};

/// Reads the occupation accumulators recorded during simulation; `radii`
/// must match the ones the ensembles were simulated with.
OccupationTimes MeasureOccupationTimes(const std::vector<TrajectoryEnsemble>& ensembles,
                                       const std::vector<double>& radii);

struct DecayGaugeConstruction {
  std::vector<double> radii;
  /// T_0..T_imax plus the extrapolated T_{imax+1}.
  std::vector<double> times;
  /// l_0..l_{imax+1}.
  std::vector<double> weights;
  double budget = 0.0;
  GaugeFunction gauge = GaugeFunction::Zero();
};

/// l_i = 2^-i / max(T_i, 1); knots (0, 0), (r_i, l_{i+1}) and l = l_1 beyond
/// r_0. Throws PreconditionError for censored or decreasing T_i, or radii that
/// do not decrease.
DecayGaugeConstruction BuildDecayGauge(const std::vector<double>& times,
                                       const std::vector<double>& radii);
DecayGaugeConstruction BuildDecayGauge(const OccupationTimes& occupation);

struct SupermaxingaleResult {
  bool pass = false;
  double worst_excess = 0.0;
  int worst_path = -1;
  double worst_time = 0.0;
  double threshold = 0.0;
};

/// Uses the excess recorded online (the ensemble must have been simulated
/// with V, and l if any). Pass iff worst excess <= tol (1 + V(x0)).
SupermaxingaleResult CheckSupermaxingale(const TrajectoryEnsemble& ensemble, double tol);

struct ViabilityEstimate {
  double escape_fraction = 0.0;
  /// sup_t V(X_t) - level for escaped paths, ascending.
  std::vector<double> excess;
};

/// Fraction of paths with sup_t V(X_t) > level (1 + tol). Throws
/// PreconditionError when V(x0) > level.
ViabilityEstimate EmpiricalViability(const TrajectoryEnsemble& ensemble, double level, double tol);

}  // namespace asclf
