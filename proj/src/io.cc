#include "asclf/io.h"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace asclf {
namespace {

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  return out;
}

void CoordinateHeader(std::ostream& out, int n) {
  for (int k = 0; k < n; ++k) out << "x" << (k + 1) << ",";
}

// JSON has no infinities; emit them as strings.
Json Number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

void WriteJson(const Json& json, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  out << json.dump(2) << "\n";
}

Json ReportSummaryJson(const VerificationReport& report) {
  const VerificationSummary& s = report.summary;
  Json j;
  j["name"] = report.name;
  j["all_pass"] = report.all_pass();
  j["checked"] = s.checked;
  j["passed"] = s.passed;
  j["failed"] = s.failed;
  j["nonfinite"] = s.nonfinite;
  j["inconclusive"] = s.inconclusive;
  j["excluded"] = s.excluded;
  j["nonsmooth"] = s.nonsmooth;
  j["worst_margin"] = Number(s.worst_margin);
  j["failing_nodes"] = s.failing_nodes;
  if (report.boundary_min_value) j["boundary_min_value"] = Number(*report.boundary_min_value);
  return j;
}

void WriteReportCsv(const VerificationReport& report, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  const int n = report.nodes.empty() ? 0 : static_cast<int>(report.nodes.front().x.size());
  CoordinateHeader(out, n);
  out << "margin,tol,verdict,witness,tangency_residual,flag\n";
  for (const NodeVerdict& v : report.nodes) {
    for (int k = 0; k < n; ++k) out << v.x[k] << ",";
    const char* verdict = !v.checked ? "nonfinite" : v.inconclusive ? "inconclusive" : v.pass ? "pass" : "fail";
    out << v.margin << "," << v.tol << "," << verdict << "," << v.witness << ","
        << v.tangency_residual << "," << v.flag << "\n";
  }
}

Json ValueRunJson(const ValueRun& run) {
  Json j;
  j["name"] = run.field.name;
  j["dt"] = run.scheme.dt;
  Json increments = Json::array();
  for (const VectorXd& w : run.scheme.increments) {
    increments.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  }
  j["increments"] = increments;
  j["cap"] = run.scheme.cap;
  j["max_iter"] = run.scheme.max_iter;
  j["residual_tol"] = run.scheme.residual_tol;
  j["iterations"] = run.iterations();
  j["converged"] = run.converged;
  j["monotone"] = run.monotone;
  j["worst_decrease"] = run.worst_decrease;
  j["residual_history"] = run.residual_history;
  return j;
}

void WriteFeedbackCsv(const FeedbackMap& feedback, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  const Grid& g = feedback.grid;
  CoordinateHeader(out, g.dim());
  out << "control\n";
  VectorXd x(g.dim());
  for (Index i = 0; i < g.size(); ++i) {
    g.Node(i, x);
    for (int k = 0; k < g.dim(); ++k) out << x[k] << ",";
    out << feedback.control[static_cast<std::size_t>(i)] << "\n";
  }
}

Json EnsembleJson(const TrajectoryEnsemble& e) {
  Json j;
  j["x0"] = std::vector<double>(e.x0.data(), e.x0.data() + e.x0.size());
  j["dt"] = e.dt;
  j["horizon"] = e.horizon;
  j["steps"] = e.steps;
  j["paths"] = e.paths.size();
  j["seed"] = e.seed;
  j["increments"] = ToString(e.increments);
  j["control"] = e.control;
  j["exited"] = e.exited();
  j["max_sup_radius"] = e.max_sup_radius();
  if (e.has_v) j["max_excess"] = e.max_excess();
  return j;
}

void WriteEnsembleCsv(const TrajectoryEnsemble& e, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  out << "path,sup_radius,final_radius,integral_l,sup_v,excess,sup_distance,exited,exit_time\n";
  for (std::size_t p = 0; p < e.paths.size(); ++p) {
    const PathStats& s = e.paths[p];
    out << p << "," << s.sup_radius << "," << s.final_radius << "," << s.integral_l << ","
        << s.sup_v << "," << s.excess << "," << s.sup_distance << "," << (s.exited ? 1 : 0) << ","
        << s.exit_time << "\n";
  }
}

void WritePathSamplesCsv(const TrajectoryEnsemble& e, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  const int n = static_cast<int>(e.x0.size());
  out << "t,";
  CoordinateHeader(out, n);
  out << "path\n";
  for (const PathSample& s : e.samples) {
    out << s.t << ",";
    for (int k = 0; k < n; ++k) out << s.x[k] << ",";
    out << s.path << "\n";
  }
}

Json GaugeJson(const GaugeFunction& gauge) {
  Json j;
  switch (gauge.kind()) {
    case GaugeFunction::Kind::kKnots:
      j["kind"] = "knots";
      j["radii"] = gauge.knot_radii();
      j["values"] = gauge.knot_values();
      break;
    case GaugeFunction::Kind::kRadialExpression:
      j["kind"] = "radial";
      break;
    case GaugeFunction::Kind::kStateExpression:
      j["kind"] = "state";
      break;
  }
  j["monotone"] = gauge.IsMonotone();
  j["lipschitz"] = gauge.LipschitzConstant();
  return j;
}

}  // namespace asclf
