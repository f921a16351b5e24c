#include "dpsl/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dpsl::moe {

RouterOutput router_forward(const Eigen::MatrixXd& tokens, const RouterParams& params) {
    if (tokens.cols() != params.w_g.rows())
        throw std::invalid_argument("router_forward: token dim does not match router weights");
    RouterOutput out;
    out.logits = tokens * params.w_g;
    out.probs.probs.resize(out.logits.rows(), out.logits.cols());
    for (Eigen::Index t = 0; t < out.logits.rows(); ++t) {
        const double m = out.logits.row(t).maxCoeff();
        Eigen::ArrayXd e = (out.logits.row(t).array() - m).exp();
        out.probs.probs.row(t) = (e / e.sum()).matrix();
    }
    return out;
}

std::pair<std::vector<Eigen::Index>, Eigen::VectorXd>
top_k_select(const Eigen::VectorXd& probs, Eigen::Index k, bool renormalize,
             const Eigen::VectorXd& selection_bias) {
    const Eigen::Index n = probs.size();
    if (k < 1 || k > n)
        throw std::invalid_argument("top_k_select: K must satisfy 1 <= K <= N");
    Eigen::VectorXd score = probs;
    if (selection_bias.size() > 0) {
        if (selection_bias.size() != n)
            throw std::invalid_argument("top_k_select: bias dimension mismatch");
        score += selection_bias;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // stable sort on descending score keeps ties toward the lowest index
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return score[i] > score[j]; });
    order.resize(static_cast<std::size_t>(k));
    Eigen::VectorXd gates(k);
    for (Eigen::Index i = 0; i < k; ++i)
        gates[i] = probs[order[static_cast<std::size_t>(i)]];
    if (renormalize)
        gates /= gates.sum();
    return {std::move(order), std::move(gates)};
}

Eigen::MatrixXd moe_forward(const Eigen::MatrixXd& tokens, const ExpertSet& experts,
                            const ExpertSet& shared, const RouterParams& router,
                            const MoEConfig& config) {
    if (static_cast<Eigen::Index>(experts.size()) != config.n_experts)
        throw std::invalid_argument("moe_forward: expert count does not match config");
    const RouterOutput routed = router_forward(tokens, router);

    // Evaluate every expert on the full batch, then gather gated rows.
    std::vector<Eigen::MatrixXd> expert_out;
    expert_out.reserve(experts.size());
    for (const auto& e : experts)
        expert_out.push_back(e.forward(tokens));

    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(tokens.rows(), tokens.cols());
    for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
        const auto [idx, gates] =
            top_k_select(routed.probs.probs.row(t).transpose(), config.top_k,
                         config.renormalize_gates);
        for (Eigen::Index i = 0; i < config.top_k; ++i)
            y.row(t) += gates[i] * expert_out[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].row(t);
    }
    for (const auto& s : shared)
        y += s.forward(tokens);
    return y;
}

LoadStats compute_load_stats(const shaping::ProbBatch& probs, const MoEConfig& config,
                             const Eigen::VectorXd& selection_bias) {
    const Eigen::Index t_count = probs.probs.rows();
    const Eigen::Index n = probs.probs.cols();
    LoadStats stats;
    stats.loads = Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        const auto [idx, gates] = top_k_select(probs.probs.row(t).transpose(),
                                               config.top_k, false, selection_bias);
        for (Eigen::Index i : idx)
            stats.loads[i] += 1.0;
    }
    stats.f = stats.loads / static_cast<double>(t_count);
    stats.p = probs.probs.colwise().mean().transpose();
    return stats;
}

double load_balancing_loss(const LoadStats& stats, Eigen::Index top_k) {
    const Eigen::Index n = stats.f.size();
    return static_cast<double>(n) * (stats.f / static_cast<double>(top_k)).dot(stats.p);
}

double z_loss(const Eigen::MatrixXd& logits) {
    if (!logits.allFinite())
        throw std::domain_error("z_loss: logits must be finite");
    double acc = 0.0;
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const double m = logits.row(t).maxCoeff();
        const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
        acc += lse * lse;
    }
    return acc / static_cast<double>(logits.rows());
}

DeepSeekBalancer deepseek_update(const DeepSeekBalancer& balancer, const LoadStats& stats) {
    if (balancer.biases.size() != stats.loads.size())
        throw std::invalid_argument("deepseek_update: dimension mismatch");
    DeepSeekBalancer next = balancer;
    const double mean_load = stats.loads.mean();
    for (Eigen::Index i = 0; i < next.biases.size(); ++i) {
        if (stats.loads[i] > mean_load)
            next.biases[i] -= balancer.update_rate;
        else if (stats.loads[i] < mean_load)
            next.biases[i] += balancer.update_rate;
    }
    return next;
}

double cov(const Eigen::VectorXd& loads) {
    const double mean = loads.mean();
    if (!(mean > 0.0))
        throw std::domain_error("cov: mean load must be positive");
    const double var = (loads.array() - mean).square().mean();
    return std::sqrt(var) / mean;
}

Eigen::MatrixXd simplex_project(const Eigen::MatrixXd& probs) {
    if (probs.cols() != 3)
        throw std::invalid_argument("simplex_project: requires K = 3");
    Eigen::MatrixXd xy(probs.rows(), 2);
    const double h = std::sqrt(3.0) / 2.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        xy(r, 0) = probs(r, 1) + 0.5 * probs(r, 2);
        xy(r, 1) = h * probs(r, 2);
    }
    return xy;
}

} // namespace dpsl::moe
