// Command-line driver: verification, value iteration, simulation and gauge
// fitting for controlled diffusions described by a model file.
//
// Exit codes: 0 success, 1 verification failure or unconverged iteration,
// 2 configuration error, 3 numerical abort.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asclf/field_ops.h"
#include "asclf/io.h"
#include "asclf/model_file.h"
#include "asclf/stochastic.h"
#include "asclf/value_engine.h"
#include "asclf/verifier.h"

namespace asclf {
namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kFailed = 1, kConfig = 2, kNumerical = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string grid = "41";
  std::string lower;
  std::string upper;
  double rho = -1.0;
  double dt = 0.0;
  double cap = 0.0;
  std::optional<double> tol;
  double eps_tan = 1e-6;
  double field_eps_tan = 0.0;
  int max_iter = 100000;
  double residual_tol = 1e-7;
  std::string kind = "sup";
  double lambda = 1.0;
  double theta = 0.0;
  double k_radius = 1.0;
  double sim_dt = 1e-3;
  double horizon = 10.0;
  int paths = 200;
  std::uint64_t seed = 1;
  std::string increments = "gaussian";
  std::string x0;
  int control = 0;
  double level = 0.5;
  double sm_tol = 0.0;
  int imax = 12;
  int workers = 1;
  std::string out = "runs";
};

std::vector<double> ParseList(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("cannot read " + what + " entry '" + cell + "'");
    }
  }
  return out;
}

VectorXd ToVector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Json ConfigJson(const RunConfig& c, const std::string& model_text) {
  Json j;
  j["command"] = c.command;
  j["model"] = c.model_path;
  j["model_hash"] = HexDigest(Fnv1a(model_text));
  j["grid"] = c.grid;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  j["rho"] = c.rho;
  j["dt"] = c.dt;
  j["cap"] = c.cap;
  j["tol"] = c.tol ? Json(*c.tol) : Json(nullptr);
  j["eps_tan"] = c.eps_tan;
  j["field_eps_tan"] = c.field_eps_tan;
  j["max_iter"] = c.max_iter;
  j["residual_tol"] = c.residual_tol;
  j["kind"] = c.kind;
  j["lambda"] = c.lambda;
  j["theta"] = c.theta;
  j["K"] = c.k_radius;
  j["sim_dt"] = c.sim_dt;
  j["T"] = c.horizon;
  j["paths"] = c.paths;
  j["seed"] = c.seed;
  j["increments"] = c.increments;
  j["x0"] = c.x0;
  j["control"] = c.control;
  j["level"] = c.level;
  j["sm_tol"] = c.sm_tol;
  j["imax"] = c.imax;
  j["workers"] = c.workers;
  return j;
}

// Loaded model plus the run directory and manifest shared by all commands.
struct Run {
  RunConfig config;
  ModelFile file;
  fs::path dir;
  Json manifest;

  const ControlledDiffusion& model() const { return file.model; }
  void Artifact(const std::string& name) { manifest["artifacts"].push_back(name); }
  fs::path Path(const std::string& name) {
    Artifact(name);
    return dir / name;
  }
};

Run OpenRun(const RunConfig& config) {
  std::ifstream in(config.model_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + config.model_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Run run{config, ParseModelFile(text), {}, {}};
  run.manifest["config"] = ConfigJson(config, text);
  // Workers do not change results, so they stay out of the directory name.
  Json key = run.manifest["config"];
  key.erase("workers");
  run.dir = fs::path(config.out) / (config.command + "-" + HexDigest(Fnv1a(key.dump())));
  fs::create_directories(run.dir);
  run.manifest["run_dir"] = run.dir.string();
  run.manifest["artifacts"] = Json::array();
  run.manifest["stages"] = Json::array();
  return run;
}

int Finish(Run& run, int code) {
  run.manifest["exit_code"] = code;
  WriteJson(run.manifest, run.dir / "manifest.json");
  std::cout << "run directory: " << run.dir.string() << "\n";
  return code;
}

void Stage(Run& run, const std::string& name, bool pass, Json detail) {
  detail["stage"] = name;
  detail["pass"] = pass;
  run.manifest["stages"].push_back(detail);
  std::cout << (pass ? "[pass] " : "[fail] ") << name << "\n";
}

Grid MakeGrid(const Run& run) {
  const RunConfig& c = run.config;
  const int n = run.model().state_dim();
  VectorXd lower, upper;
  if (!c.lower.empty() || !c.upper.empty()) {
    lower = ToVector(ParseList(c.lower, "--lower"));
    upper = ToVector(ParseList(c.upper, "--upper"));
  } else if (run.model().domain()) {
    lower = run.model().domain()->lower;
    upper = run.model().domain()->upper;
  } else {
    throw ConfigError("model has no [domain]; pass --lower and --upper");
  }
  if (lower.size() != n || upper.size() != n) throw ConfigError("grid bounds need " + std::to_string(n) + " entries");
  const std::vector<double> counts = ParseList(c.grid, "--grid");
  Eigen::VectorXi nodes(n);
  for (int k = 0; k < n; ++k) {
    const double v = counts.size() == 1 ? counts[0] : (static_cast<int>(counts.size()) == n ? counts[k] : -1.0);
    if (v < 3 || v != std::floor(v)) throw ConfigError("--grid needs 1 or N integer node counts >= 3");
    nodes[k] = static_cast<int>(v);
  }
  return Grid(lower, upper, nodes, c.rho);
}

VerifierOptions MakeVerifierOptions(const RunConfig& c) {
  VerifierOptions o;
  o.eps_tan = c.eps_tan;
  o.tol = c.tol;
  if (c.rho >= 0.0) o.rho = c.rho;
  o.workers = c.workers;
  return o;
}

RobustScheme MakeScheme(const RunConfig& c, double default_cap) {
  RobustScheme s;
  s.dt = c.dt;
  s.cap = c.cap > 0.0 ? c.cap : default_cap;
  s.max_iter = c.max_iter;
  s.residual_tol = c.residual_tol;
  s.workers = c.workers;
  return s;
}

// Radius of the largest origin-centred ball inside the grid box.
double InscribedRadius(const Grid& grid) {
  return std::min((-grid.lower()).minCoeff(), grid.upper().minCoeff());
}

std::optional<GaugeFunction> ModelGauge(const Run& run) {
  if (!run.file.gauge) return std::nullopt;
  return GaugeFunction::OfState(*run.file.gauge, run.model().state_dim());
}

const CandidateFunction& RequireCandidate(const Run& run) {
  if (!run.file.candidate) throw ConfigError("model file has no [candidate] V");
  return *run.file.candidate;
}

void WriteReport(Run& run, const VerificationReport& report, const std::string& stem) {
  WriteJson(ReportSummaryJson(report), run.Path(stem + ".json"));
  WriteReportCsv(report, run.Path(stem + ".csv"));
}

// ---------------------------------------------------------------------------

int CmdCheck(Run& run) {
  const CandidateFunction& v = RequireCandidate(run);
  const Grid grid = MakeGrid(run);
  const VerifierOptions options = MakeVerifierOptions(run.config);
  const std::optional<GaugeFunction> l = ModelGauge(run);
  const CandidateJets jets(v);
  bool ok = true;
  if (run.file.target) {
    const TargetSpec& t = *run.file.target;
    const VerificationReport report =
        CheckSetLyapunov(run.model(), jets, t.distance, GaugeFunction::Radial(t.gamma1),
                         GaugeFunction::Radial(t.gamma2), grid, l ? &*l : nullptr, options);
    WriteReport(run, report, "set_report");
    Stage(run, "set-lyapunov", report.all_pass(), ReportSummaryJson(report));
    ok = report.all_pass();
  } else {
    const VerificationReport report = CheckSupersolution(run.model(), jets, grid, l ? &*l : nullptr, options);
    WriteReport(run, report, "report");
    Stage(run, "supersolution", report.all_pass(), ReportSummaryJson(report));
    if (!report.all_pass()) std::cout << report.summary.failed << " failing nodes\n";
    ok = report.all_pass();
    const VerificationReport radial = RadialSufficientCheck(run.model(), grid, options);
    WriteReport(run, radial, "radial_report");
    // Sufficient, not necessary: reported without affecting the exit code.
    run.manifest["radial_sufficient"] = ReportSummaryJson(radial);
  }
  return ok ? kOk : kFailed;
}

int CmdValue(Run& run) {
  const RunConfig& c = run.config;
  const Grid grid = MakeGrid(run);
  if (c.kind == "sup") {
    const RobustScheme scheme = MakeScheme(c, InscribedRadius(grid));
    const ValueRun value = WorstCaseSupValue(run.model(), grid, scheme);
    WriteFieldCsv(value.field, run.Path("field.csv"));
    WriteFieldBinary(value.field, run.Path("field.bin"));
    WriteJson(ValueRunJson(value), run.Path("field.json"));
    WriteFeedbackCsv(SynthesizeFeedback(run.model(), value.field, scheme), run.Path("feedback.csv"));
    Stage(run, "sup-value", value.converged && value.monotone, {{"iterations", value.iterations()}});
    return value.converged && value.monotone ? kOk : kFailed;
  }
  if (c.kind == "integral") {
    const std::optional<GaugeFunction> l = ModelGauge(run);
    if (!l) throw ConfigError("integral value needs a gauge l in the [candidate] section");
    const RobustScheme scheme = MakeScheme(c, 10.0);
    const ValueRun value = WorstCaseIntegralValue(run.model(), grid, *l, scheme);
    WriteFieldCsv(value.field, run.Path("field.csv"));
    WriteFieldBinary(value.field, run.Path("field.bin"));
    WriteJson(ValueRunJson(value), run.Path("field.json"));
    WriteFeedbackCsv(SynthesizeFeedback(run.model(), value.field, scheme), run.Path("feedback.csv"));
    Stage(run, "integral-value", value.converged && value.monotone, {{"iterations", value.iterations()}});
    return value.converged && value.monotone ? kOk : kFailed;
  }
  if (c.kind == "discounted") {
    if (!(c.lambda > 0.0)) throw ConfigError("--lambda must be positive");
    RobustScheme scheme = MakeScheme(c, 1.0).Resolved(run.model(), grid);
    const double theta = c.theta > 0.0 ? c.theta : 10.0 * scheme.dt;
    const DiscountedResult result =
        DiscountedValueAndPropSet(run.model(), grid, c.k_radius, c.lambda, theta, scheme);
    WriteFieldCsv(result.run.field, run.Path("field.csv"));
    WriteFieldBinary(result.run.field, run.Path("field.bin"));
    Json sidecar = ValueRunJson(result.run);
    sidecar["lambda"] = c.lambda;
    sidecar["theta"] = theta;
    sidecar["K"] = c.k_radius;
    sidecar["prop_set_size"] = result.prop_set.size();
    WriteJson(sidecar, run.Path("field.json"));
    const bool ok = result.run.converged && result.run.monotone;
    Stage(run, "discounted-value", ok, {{"prop_set_size", result.prop_set.size()}});
    return ok ? kOk : kFailed;
  }
  throw ConfigError("--kind must be sup, integral or discounted");
}

SimulationOptions MakeSimulation(const Run& run) {
  const RunConfig& c = run.config;
  if (!(c.sim_dt > 0.0) || !(c.horizon > 0.0) || c.paths < 1) {
    throw ConfigError("--sim-dt, --T and --paths must be positive");
  }
  SimulationOptions o;
  o.dt = c.sim_dt;
  o.horizon = c.horizon;
  o.paths = c.paths;
  o.seed = c.seed;
  o.increments = ParseIncrementMode(c.increments);
  o.workers = c.workers;
  return o;
}

VectorXd InitialState(const Run& run, double default_radius) {
  const int n = run.model().state_dim();
  if (run.config.x0.empty()) return default_radius * VectorXd::Unit(n, 0);
  const VectorXd x0 = ToVector(ParseList(run.config.x0, "--x0"));
  if (x0.size() != n) throw ConfigError("--x0 needs " + std::to_string(n) + " entries");
  return x0;
}

int CmdSimulate(Run& run) {
  const RunConfig& c = run.config;
  if (c.control < 0 || c.control >= run.model().num_controls()) throw ConfigError("--control out of range");
  SimulationOptions o = MakeSimulation(run);
  const std::optional<GaugeFunction> l = ModelGauge(run);
  if (run.file.candidate) o.v = &*run.file.candidate;
  if (l) o.l = &*l;
  o.thin_stride = std::max(1, static_cast<int>(std::llround(0.01 / o.dt)));
  o.thin_paths = std::min(c.paths, 10);
  const VectorXd x0 = InitialState(run, 0.5);
  const TrajectoryEnsemble e = SimulateEnsemble(run.model(), ControlSource{c.control, nullptr}, x0, o);
  WriteEnsembleCsv(e, run.Path("ensemble.csv"));
  WritePathSamplesCsv(e, run.Path("paths.csv"));
  Json stats = EnsembleJson(e);
  bool ok = e.exited() == 0;
  if (e.has_v) {
    const double tol = c.sm_tol > 0.0 ? c.sm_tol : 5.0 * std::sqrt(o.dt);
    const SupermaxingaleResult sm = CheckSupermaxingale(e, tol);
    stats["supermaxingale"] = {{"pass", sm.pass}, {"worst_excess", sm.worst_excess},
                               {"threshold", sm.threshold}, {"worst_path", sm.worst_path},
                               {"worst_time", sm.worst_time}};
    ok = ok && sm.pass;
  }
  WriteJson(stats, run.Path("ensemble.json"));
  Stage(run, "simulate", ok, stats);
  return ok ? kOk : kFailed;
}

std::vector<TrajectoryEnsemble> RadialEnsembles(const Run& run, const ControlSource& control,
                                                double r0, SimulationOptions o) {
  std::vector<TrajectoryEnsemble> out;
  const VectorXd dir = InitialState(run, 1.0).normalized();
  for (double f : {0.125, 0.25, 0.5, 1.0}) {
    out.push_back(SimulateEnsemble(run.model(), control, f * r0 * dir, o));
  }
  return out;
}

Json GaugeStage(const StabilizabilityEstimate& s, const DecayEstimate& d) {
  return {{"stabilizability", {{"consistent", s.consistent}, {"reason", s.reason},
                               {"radii", s.radii}, {"sup_radius", s.sup_radius},
                               {"intercept", s.intercept}, {"gamma", GaugeJson(s.gauge.gamma)}}},
          {"decay", {{"kappa", d.kappa}, {"asymptotic", d.asymptotic}, {"stable", d.stable},
                     {"envelope_holds", d.envelope_holds}, {"reason", d.reason},
                     {"gamma", GaugeJson(d.beta.gamma)}}}};
}

int CmdGauge(Run& run) {
  const RunConfig& c = run.config;
  const SimulationOptions o = MakeSimulation(run);
  const double r0 = c.x0.empty() ? 0.5 : InitialState(run, 0.5).norm();
  const auto ensembles = RadialEnsembles(run, ControlSource{c.control, nullptr}, r0, o);
  const StabilizabilityEstimate s = EstimateStabilizabilityGauge(ensembles);
  const DecayEstimate d = EstimateDecayEnvelope(ensembles);
  const Json detail = GaugeStage(s, d);
  WriteJson(detail, run.Path("gauge.json"));
  Stage(run, "gauge", s.consistent, detail);
  return s.consistent ? kOk : kFailed;
}

int CmdViability(Run& run) {
  const RunConfig& c = run.config;
  const CandidateFunction& v = RequireCandidate(run);
  const Grid grid = MakeGrid(run);
  const VerificationReport report =
      CheckViabilityBoundary(run.model(), CandidateJets(v), grid, c.level, MakeVerifierOptions(c));
  WriteReport(run, report, "viability_report");
  Stage(run, "viability-boundary", report.all_pass(), ReportSummaryJson(report));
  bool ok = report.all_pass();
  if (!c.x0.empty()) {
    SimulationOptions o = MakeSimulation(run);
    o.v = &v;
    const VectorXd x0 = InitialState(run, 0.0);
    const TrajectoryEnsemble e = SimulateEnsemble(run.model(), ControlSource{c.control, nullptr}, x0, o);
    const double tol = c.sm_tol > 0.0 ? c.sm_tol : 5.0 * std::sqrt(o.dt);
    const ViabilityEstimate est = EmpiricalViability(e, c.level, tol);
    Stage(run, "empirical-viability", est.escape_fraction <= 0.01,
          {{"escape_fraction", est.escape_fraction}, {"tol", tol}});
    ok = ok && est.escape_fraction <= 0.01;
  }
  return ok ? kOk : kFailed;
}

int CmdPipeline(Run& run) {
  const RunConfig& c = run.config;
  const Grid grid = MakeGrid(run);
  const double h = grid.max_spacing();

  // 1. Sup-cost value, plus the doubled-cap rerun.
  const RobustScheme scheme = MakeScheme(c, InscribedRadius(grid));
  const ValueRun value = WorstCaseSupValue(run.model(), grid, scheme);
  WriteFieldCsv(value.field, run.Path("sup_value.csv"));
  WriteJson(ValueRunJson(value), run.Path("sup_value.json"));
  const bool value_ok = value.converged && value.monotone;
  Stage(run, "sup-value", value_ok, {{"iterations", value.iterations()}, {"cap", value.scheme.cap}});
  if (!value_ok) return kFailed;

  RobustScheme doubled = scheme;
  doubled.cap = 2.0 * value.scheme.cap;
  const ValueRun value2 = WorstCaseSupValue(run.model(), grid, doubled);
  const double cap_tol = c.tol.value_or(10.0 * c.residual_tol);
  const double drop = (value.field.values - value2.field.values).maxCoeff();
  const bool cap_ok = value2.converged && drop <= cap_tol;
  Stage(run, "cap-monotonicity", cap_ok, {{"max_decrease", drop}, {"tol", cap_tol}});
  if (!cap_ok) return kFailed;

  // 2. Feedback and ensembles.
  const FeedbackMap feedback = SynthesizeFeedback(run.model(), value.field, scheme);
  WriteFeedbackCsv(feedback, run.Path("feedback.csv"));
  SimulationOptions o = MakeSimulation(run);
  const std::optional<GaugeFunction> l = ModelGauge(run);
  if (run.file.candidate) o.v = &*run.file.candidate;
  if (l) o.l = &*l;
  const double r0 = c.x0.empty() ? 0.5 * value.scheme.cap : InitialState(run, 0.5).norm();
  for (int i = 0; i <= c.imax; ++i) o.radii.push_back(std::ldexp(r0, -i));
  const auto ensembles = RadialEnsembles(run, ControlSource{0, &feedback}, r0, o);
  WriteEnsembleCsv(ensembles.back(), run.Path("ensemble.csv"));

  // 3. Gauges.
  const StabilizabilityEstimate s = EstimateStabilizabilityGauge(ensembles);
  const DecayEstimate d = EstimateDecayEnvelope(ensembles);
  const Json gauge_detail = GaugeStage(s, d);
  WriteJson(gauge_detail, run.Path("gauge.json"));
  Stage(run, "gauge", s.consistent, gauge_detail);
  if (!s.consistent) return kFailed;

  // 4. Supermaxingale condition for the model's own candidate.
  if (o.v != nullptr) {
    const double tol = c.sm_tol > 0.0 ? c.sm_tol : 5.0 * std::sqrt(o.dt);
    const SupermaxingaleResult sm = CheckSupermaxingale(ensembles.back(), tol);
    Stage(run, "supermaxingale", sm.pass, {{"worst_excess", sm.worst_excess}, {"threshold", sm.threshold}});
    if (!sm.pass) return kFailed;
  }

  // 5. Decay gauge from occupation times (uncensored prefix of the radii).
  const OccupationTimes occ = MeasureOccupationTimes(ensembles, o.radii);
  std::size_t usable = 0;
  while (usable < occ.censored.size() && !occ.censored[usable]) ++usable;
  if (usable >= 1) {
    const std::vector<double> times(occ.times.begin(), occ.times.begin() + static_cast<long>(usable));
    const std::vector<double> radii(occ.radii.begin(), occ.radii.begin() + static_cast<long>(usable));
    const DecayGaugeConstruction built = BuildDecayGauge(times, radii);
    RobustScheme integral = scheme;
    integral.cap = 2.0 * built.budget + 1.0;
    const ValueRun iv = WorstCaseIntegralValue(run.model(), grid, built.gauge, integral);
    WriteFieldCsv(iv.field, run.Path("integral_value.csv"));
    double inside_max = 0.0;
    for (Index i = 0; i < grid.size(); ++i) {
      if (grid.Node(i).norm() <= r0) inside_max = std::max(inside_max, iv.field.values[i]);
    }
    const double slack = 5.0 * (iv.scheme.dt + h);
    const bool gauge_ok = built.budget <= 2.0 && built.gauge.IsMonotone() &&
                          built.gauge.ValueAtZero(grid.dim()) == 0.0 && iv.converged &&
                          inside_max <= built.budget + slack;
    Stage(run, "decay-gauge", gauge_ok,
          {{"levels", usable}, {"budget", built.budget}, {"weights", built.weights},
           {"integral_value_max", inside_max}, {"gauge", GaugeJson(built.gauge)}});
    if (!gauge_ok) return kFailed;
  } else {
    Stage(run, "decay-gauge", true, {{"skipped", "all occupation times censored"}});
  }

  // 6. Re-verify the computed value as a Lyapunov function.
  VerifierOptions vo = MakeVerifierOptions(c);
  vo.eps_tan = c.field_eps_tan > 0.0 ? c.field_eps_tan : 10.0 * h;
  vo.rho = 4.0 * h;
  vo.crosscheck = false;
  const VerificationReport report = CheckSupersolution(run.model(), FieldJets(value.field), grid, nullptr, vo);
  int band = 0, band_pass = 0;
  for (const NodeVerdict& n : report.nodes) {
    if (!n.checked || n.x.norm() > 0.8 * value.scheme.cap || grid.OnBoundary(n.node)) continue;
    ++band;
    if (n.pass) ++band_pass;
  }
  WriteReport(run, report, "value_report");
  const double fraction = band == 0 ? 0.0 : static_cast<double>(band_pass) / band;
  Stage(run, "reverify-value", fraction >= 0.99, {{"band_nodes", band}, {"pass_fraction", fraction}});
  return fraction >= 0.99 ? kOk : kFailed;
}

void AddCommon(CLI::App* app, RunConfig& c) {
  app->add_option("--model", c.model_path, "Model file")->required();
  app->add_option("--out", c.out, "Parent directory for run directories");
  app->add_option("--workers", c.workers, "Worker threads (results do not depend on it)");
}

void AddGrid(CLI::App* app, RunConfig& c) {
  app->add_option("--grid", c.grid, "Nodes per axis: one count or N comma-separated counts");
  app->add_option("--lower", c.lower, "Grid lower corner (defaults to the model domain)");
  app->add_option("--upper", c.upper, "Grid upper corner (defaults to the model domain)");
  app->add_option("--rho", c.rho, "Origin exclusion radius (default 2 max h)");
}

void AddVerifier(CLI::App* app, RunConfig& c) {
  app->add_option("--tol", c.tol, "Absolute verdict tolerance (default 10 h^2 times local scale)");
  app->add_option("--eps-tan", c.eps_tan, "Relative tangency tolerance");
}

void AddScheme(CLI::App* app, RunConfig& c) {
  app->add_option("--dt", c.dt, "Scheme time step (default h_min / (2 max|f| + 1))");
  app->add_option("--cap", c.cap, "Saturation cap");
  app->add_option("--max-iter", c.max_iter, "Sweep limit");
  app->add_option("--residual-tol", c.residual_tol, "Sup-norm stopping residual");
}

void AddSimulation(CLI::App* app, RunConfig& c) {
  app->add_option("--sim-dt", c.sim_dt, "Euler-Maruyama step");
  app->add_option("--T", c.horizon, "Horizon");
  app->add_option("--paths", c.paths, "Paths per initial state");
  app->add_option("--seed", c.seed, "Base seed");
  app->add_option("--increments", c.increments, "gaussian or bernoulli");
  app->add_option("--x0", c.x0, "Initial state, comma separated");
  app->add_option("--control", c.control, "Fixed control index");
  app->add_option("--sm-tol", c.sm_tol, "Relative supermaxingale / viability tolerance (default 5 sqrt(dt))");
}

int Main(int argc, char** argv) {
  CLI::App app{"Control Lyapunov functions for almost-sure stabilizability of controlled diffusions"};
  app.require_subcommand(1);
  RunConfig c;

  CLI::App* check = app.add_subcommand("check", "Verify the candidate V of a model file");
  AddCommon(check, c);
  AddGrid(check, c);
  AddVerifier(check, c);

  CLI::App* value = app.add_subcommand("value", "Compute a value function by robust iteration");
  AddCommon(value, c);
  AddGrid(value, c);
  AddScheme(value, c);
  value->add_option("--kind", c.kind, "sup, integral or discounted");
  value->add_option("--lambda", c.lambda, "Discount rate (> 0)");
  value->add_option("--theta", c.theta, "Propagation-set threshold (default 10 dt)");
  value->add_option("--K", c.k_radius, "Radius K of the discounted running cost");

  CLI::App* simulate = app.add_subcommand("simulate", "Euler-Maruyama ensemble under a fixed control");
  AddCommon(simulate, c);
  AddSimulation(simulate, c);

  CLI::App* gauge = app.add_subcommand("gauge", "Fit class K and KL gauges from ensembles");
  AddCommon(gauge, c);
  AddSimulation(gauge, c);

  CLI::App* viability = app.add_subcommand("viability", "Viability of a sublevel set of V");
  AddCommon(viability, c);
  AddGrid(viability, c);
  AddVerifier(viability, c);
  AddSimulation(viability, c);
  viability->add_option("--level", c.level, "Sublevel mu");

  CLI::App* pipeline = app.add_subcommand("pipeline", "Value, feedback, simulation, gauges and re-verification");
  AddCommon(pipeline, c);
  AddGrid(pipeline, c);
  AddVerifier(pipeline, c);
  AddScheme(pipeline, c);
  AddSimulation(pipeline, c);
  pipeline->add_option("--field-eps-tan", c.field_eps_tan, "Tangency tolerance for computed fields (default 10 h)");
  pipeline->add_option("--imax", c.imax, "Deepest occupation level r0 2^-imax");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  c.command = app.get_subcommands().front()->get_name();

  std::optional<Run> run;
  try {
    run.emplace(OpenRun(c));
    int code = kConfig;
    if (c.command == "check") code = CmdCheck(*run);
    if (c.command == "value") code = CmdValue(*run);
    if (c.command == "simulate") code = CmdSimulate(*run);
    if (c.command == "gauge") code = CmdGauge(*run);
    if (c.command == "viability") code = CmdViability(*run);
    if (c.command == "pipeline") code = CmdPipeline(*run);
    return Finish(*run, code);
  } catch (const NonFiniteError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    if (run) return Finish(*run, kNumerical);
    return kNumerical;
  } catch (const ParseError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    if (run) {
      run->manifest["error"] = e.what();
      return Finish(*run, kConfig);
    }
    return kConfig;
  }
}

}  // namespace
}  // namespace asclf

int main(int argc, char** argv) { return asclf::Main(argc, argv); }
