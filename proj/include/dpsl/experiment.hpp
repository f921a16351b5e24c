#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsl/moe.hpp"
#include "dpsl/report.hpp"
#include "dpsl/shaping.hpp"
#include "dpsl/upcycle.hpp"

namespace dpsl::harness {

/// Invalid or unparseable configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or similar numeric breakdown (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { ShapeToy, RouterSim, UpcycleCheck };
enum class RegularizerKind { None, Dpsl, LoadBalance, ZLoss, DeepSeek };

struct SourceSpec {
    std::string tag;
    Eigen::Index count = 0;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ShapeToy;
    std::uint64_t seed = 0;
    long steps = 100;
    double lr = 0.1;

    // shape-toy
    Eigen::Index categories = 3;
    double init_scale = 0.1;

    // router-sim
    Eigen::Index features = 16;
    Eigen::Index expert_hidden = 32;
    double noise_sigma = 0.01;
    moe::MoEConfig moe;
    RegularizerKind regularizer = RegularizerKind::None;
    double regularizer_weight = 0.0;
    double deepseek_update_rate = 0.001;
    long regularizer_steps = -1; // -1: all steps
    bool task = false;

    shaping::ShapingConfig shaping;
    std::vector<SourceSpec> sources;

    nlohmann::json echo; // original document, echoed into report.json
};

/// Parse a config document. Unknown keys anywhere are an error.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

/// Shaping toy: learnable per-point logits pulled toward per-source priors.
RunReport run_shape_toy(const ExperimentConfig& config);

/// Router distribution study on synthetic Gaussian token clusters.
RunReport run_router_sim(const ExperimentConfig& config);

} // namespace dpsl::harness
