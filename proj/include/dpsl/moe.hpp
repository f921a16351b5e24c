#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpsl/ffn.hpp"
#include "dpsl/shaping.hpp"

namespace dpsl::moe {

/// Bias-free linear router: logits = tokens * W_g.
struct RouterParams {
    Eigen::MatrixXd w_g; // d x N
};

struct MoEConfig {
    Eigen::Index n_experts = 4;
    Eigen::Index top_k = 2;
    Eigen::Index n_shared = 0;
    bool renormalize_gates = false;
};

/// Per-expert routing statistics over one batch.
/// f: dispatch fraction (count / tokens, so sum f = K);
/// p: mean routing probability; loads: raw dispatch counts.
struct LoadStats {
    Eigen::VectorXd f;
    Eigen::VectorXd p;
    Eigen::VectorXd loads;
};

/// Loss-free balancing state: additive selection biases, update rate u.
struct DeepSeekBalancer {
    Eigen::VectorXd biases;
    double update_rate = 0.001;
};

struct RouterOutput {
    Eigen::MatrixXd logits;       // T x N
    shaping::ProbBatch probs;     // T x N, rows on the simplex
};

RouterOutput router_forward(const Eigen::MatrixXd& tokens, const RouterParams& params);

/// Indices (ties toward the lowest index) and gate values of the K largest
/// probabilities in one row. Gates are renormalized to sum 1 only when
/// `renormalize` is set. `selection_bias`, when non-empty, is added to the
/// probabilities for ranking only; gates stay unbiased.
std::pair<std::vector<Eigen::Index>, Eigen::VectorXd>
top_k_select(const Eigen::VectorXd& probs, Eigen::Index k, bool renormalize,
             const Eigen::VectorXd& selection_bias = Eigen::VectorXd());

/// Sparse mixture forward pass: per token, sum of gated top-K expert
/// outputs plus unweighted shared-expert outputs.
Eigen::MatrixXd moe_forward(const Eigen::MatrixXd& tokens, const ExpertSet& experts,
                            const ExpertSet& shared, const RouterParams& router,
                            const MoEConfig& config);

/// Dispatch statistics of a routed batch under the given config.
LoadStats compute_load_stats(const shaping::ProbBatch& probs, const MoEConfig& config,
                             const Eigen::VectorXd& selection_bias = Eigen::VectorXd());

/// Switch-style auxiliary loss N * sum_i (f_i / K) * P_i; equals 1 under
/// perfectly uniform routing for any N, K.
double load_balancing_loss(const LoadStats& stats, Eigen::Index top_k);

/// Mean squared log-partition of the router logits.
double z_loss(const Eigen::MatrixXd& logits);

/// One loss-free balancing step: bias moves down by u for experts loaded
/// above the mean, up by u for experts below.
DeepSeekBalancer deepseek_update(const DeepSeekBalancer& balancer, const LoadStats& stats);

/// Coefficient of variation (population std / mean) of expert loads.
double cov(const Eigen::VectorXd& loads);

/// Barycentric projection of K=3 probability rows onto the equilateral
/// triangle with vertices (0,0), (1,0), (0.5, sqrt(3)/2).
Eigen::MatrixXd simplex_project(const Eigen::MatrixXd& probs);

} // namespace dpsl::moe
