#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsl/dirichlet.hpp"
#include "dpsl/shaping.hpp"

namespace dpsl::harness {

/// Everything a run produces; emit_report turns this into files.
struct RunReport {
    nlohmann::json config_echo;
    std::vector<double> loss_trace;
    std::vector<std::string> aux_names;           // extra loss.csv columns
    std::vector<std::vector<double>> aux_trace;   // one row per step
    shaping::ProbBatch final_probs;
    std::map<std::string, DirichletPrior> priors; // for CDF traces / histograms
    std::map<std::string, std::vector<double>> cvm_final; // tag -> per-category distance
    std::vector<double> cov_per_layer;
    nlohmann::json summary;
    std::vector<std::string> manifest;
};

/// Format a double with 17 significant digits.
std::string fmt17(double v);

/// Write all report artifacts into `out_dir` (created if missing):
/// loss.csv, probs_final.csv, cdf_trace_{source}_{k}.csv,
/// hist_{source}_{k}.csv, simplex.svg (K = 3 only), cov.csv, report.json.
/// Returns the manifest of written files.
std::vector<std::string> emit_report(RunReport& report, const std::string& out_dir);

} // namespace dpsl::harness
