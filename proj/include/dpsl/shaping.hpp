#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dpsl/dirichlet.hpp"
#include "dpsl/specfun.hpp"

namespace dpsl::shaping {

/// A batch of categorical probability rows (B x K), optionally tagged by
/// data source. An empty tag vector means a single untagged group.
struct ProbBatch {
    Eigen::MatrixXd probs;
    std::vector<std::string> tags;
};

enum class LayerReduction { Sum, Mean };

/// Configuration of the shaping loss. Priors are keyed by source tag;
/// the "default" entry applies to untagged rows and to tags without a
/// dedicated prior.
struct ShapingConfig {
    double lambda = 0.01;
    double clamp_eps = 1e-7;
    std::map<std::string, DirichletPrior> priors;
    LayerReduction layer_reduction = LayerReduction::Sum;
};

/// Result of sorting a sample vector for empirical-CDF evaluation.
/// ranks[j] is (j+1)/B; perm maps sorted index -> original index.
/// Ties keep original order (stable sort).
struct EcdfPositions {
    Eigen::VectorXd sorted;
    Eigen::VectorXd ranks;
    std::vector<Eigen::Index> perm;
};

EcdfPositions empirical_cdf_positions(const Eigen::VectorXd& values);

/// Single-category Cramer-von Mises distance between the empirical CDF of
/// `values` and the Beta CDF: (1/B) sum_j [j/B - F_Beta(v_(j))]^2.
double cvm_distance(const Eigen::VectorXd& values, const specfun::BetaParams& params);

/// Shaping loss: rows grouped by source tag, each group matched against
/// its prior's Beta marginals with a group-local empirical CDF, summed
/// over groups and categories and scaled by lambda.
double dpsl_loss(const ProbBatch& batch, const ShapingConfig& config);

/// Analytic gradient of dpsl_loss with respect to each probability entry,
/// treating empirical ranks as constants of the current sort order.
/// Entries clamped at the boundary get zero gradient.
Eigen::MatrixXd dpsl_grad(const ProbBatch& batch, const ShapingConfig& config);

/// Source-conditional priors: component i of tag t's prior is
/// alpha_base + alpha_spec when i belongs to t's expert group, else
/// alpha_base.
std::map<std::string, DirichletPrior> build_modality_priors(
    double alpha_base, double alpha_spec,
    const std::map<std::string, std::set<Eigen::Index>>& expert_groups,
    Eigen::Index k);

} // namespace dpsl::shaping
