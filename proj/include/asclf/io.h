#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "asclf/stochastic.h"
#include "asclf/value_engine.h"
#include "asclf/verifier.h"

namespace asclf {

using Json = nlohmann::ordered_json;

void WriteJson(const Json& json, const std::filesystem::path& path);

/// Summary block: counts, worst margin, failing node indices.
Json ReportSummaryJson(const VerificationReport& report);
/// Columns: x1..xN, margin, tol, verdict, witness, tangency_residual, flag.
void WriteReportCsv(const VerificationReport& report, const std::filesystem::path& path);

/// Scheme parameters, convergence flags and the residual history.
Json ValueRunJson(const ValueRun& run);
/// Columns: x1..xN, control.
void WriteFeedbackCsv(const FeedbackMap& feedback, const std::filesystem::path& path);

/// Seed, dt, horizon, path count and aggregate statistics.
Json EnsembleJson(const TrajectoryEnsemble& ensemble);
/// Columns: path, sup_radius, final_radius, integral_l, sup_v, excess,
/// sup_distance, exited, exit_time.
void WriteEnsembleCsv(const TrajectoryEnsemble& ensemble, const std::filesystem::path& path);
/// Thinned samples. Columns: t, x1..xN, path.
void WritePathSamplesCsv(const TrajectoryEnsemble& ensemble, const std::filesystem::path& path);

Json GaugeJson(const GaugeFunction& gauge);

}  // namespace asclf
