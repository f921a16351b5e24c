#include "dpsl/shaping.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dpsl::shaping {

namespace {

// Rows of the batch grouped by tag, in order of first appearance.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>>
group_rows(const ProbBatch& batch) {
    std::vector<std::pair<std::string, std::vector<Eigen::Index>>> groups;
    if (batch.tags.empty()) {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(batch.probs.rows()));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        groups.emplace_back(std::string{}, std::move(all));
        return groups;
    }
    if (static_cast<Eigen::Index>(batch.tags.size()) != batch.probs.rows())
        throw std::invalid_argument("ProbBatch: tag count must match row count");
    for (Eigen::Index r = 0; r < batch.probs.rows(); ++r) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == batch.tags[static_cast<std::size_t>(r)]; });
        if (it == groups.end()) {
            groups.emplace_back(batch.tags[static_cast<std::size_t>(r)], std::vector<Eigen::Index>{r});
        } else {
            it->second.push_back(r);
        }
    }
    return groups;
}

const DirichletPrior& prior_for(const ShapingConfig& config, const std::string& tag) {
    auto it = config.priors.find(tag);
    if (it == config.priors.end())
        it = config.priors.find("default");
    if (it == config.priors.end())
        throw std::invalid_argument("ShapingConfig: no prior for source tag '" + tag + "'");
    return it->second;
}

} // namespace

EcdfPositions empirical_cdf_positions(const Eigen::VectorXd& values) {
    const Eigen::Index n = values.size();
    EcdfPositions out;
    out.perm.resize(static_cast<std::size_t>(n));
    std::iota(out.perm.begin(), out.perm.end(), Eigen::Index{0});
    std::stable_sort(out.perm.begin(), out.perm.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return values[i] < values[j]; });
    out.sorted.resize(n);
    out.ranks.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.sorted[j] = values[out.perm[static_cast<std::size_t>(j)]];
        out.ranks[j] = static_cast<double>(j + 1) / static_cast<double>(n);
    }
    return out;
}

double cvm_distance(const Eigen::VectorXd& values, const specfun::BetaParams& params) {
    const auto pos = empirical_cdf_positions(values);
    const Eigen::Index n = values.size();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = pos.ranks[j] - specfun::beta_cdf(pos.sorted[j], params);
        acc += diff * diff;
    }
    return acc / static_cast<double>(n);
}

double dpsl_loss(const ProbBatch& batch, const ShapingConfig& config) {
    const Eigen::Index k_count = batch.probs.cols();
    double total = 0.0;
    for (const auto& [tag, rows] : group_rows(batch)) {
        const DirichletPrior& prior = prior_for(config, tag);
        if (prior.size() != k_count)
            throw std::invalid_argument("dpsl_loss: prior dimension does not match batch");
        Eigen::VectorXd col(static_cast<Eigen::Index>(rows.size()));
        for (Eigen::Index k = 0; k < k_count; ++k) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const double p = batch.probs(rows[i], k);
                col[static_cast<Eigen::Index>(i)] =
                    std::clamp(p, config.clamp_eps, 1.0 - config.clamp_eps);
            }
            total += cvm_distance(col, prior.marginal(k));
        }
    }
    return config.lambda * total;
}

Eigen::MatrixXd dpsl_grad(const ProbBatch& batch, const ShapingConfig& config) {
    const Eigen::Index k_count = batch.probs.cols();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(batch.probs.rows(), k_count);
    if (config.lambda == 0.0)
        return grad;
    for (const auto& [tag, rows] : group_rows(batch)) {
        const DirichletPrior& prior = prior_for(config, tag);
        if (prior.size() != k_count)
            throw std::invalid_argument("dpsl_grad: prior dimension does not match batch");
        const double b = static_cast<double>(rows.size());
        Eigen::VectorXd col(static_cast<Eigen::Index>(rows.size()));
        for (Eigen::Index k = 0; k < k_count; ++k) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                col[static_cast<Eigen::Index>(i)] = batch.probs(rows[i], k);
            Eigen::VectorXd clamped = col.cwiseMax(config.clamp_eps).cwiseMin(1.0 - config.clamp_eps);
            const auto pos = empirical_cdf_positions(clamped);
            const auto marg = prior.marginal(k);
            for (Eigen::Index j = 0; j < clamped.size(); ++j) {
                const Eigen::Index orig = pos.perm[static_cast<std::size_t>(j)];
                // clamped entries sit on the boundary of the feasible box
                if (col[orig] < config.clamp_eps || col[orig] > 1.0 - config.clamp_eps)
                    continue;
                const double p = pos.sorted[j];
                const double f = specfun::beta_cdf(p, marg);
                const double dens = specfun::beta_pdf(p, marg);
                grad(rows[static_cast<std::size_t>(orig)], k) =
                    config.lambda * (2.0 / b) * (f - pos.ranks[j]) * dens;
            }
        }
    }
    return grad;
}

std::map<std::string, DirichletPrior> build_modality_priors(
    double alpha_base, double alpha_spec,
    const std::map<std::string, std::set<Eigen::Index>>& expert_groups,
    Eigen::Index k) {
    std::map<std::string, DirichletPrior> out;
    for (const auto& [tag, group] : expert_groups) {
        if (group.empty())
            throw std::invalid_argument("build_modality_priors: empty group for '" + tag + "'");
        Eigen::VectorXd alpha = Eigen::VectorXd::Constant(k, alpha_base);
        for (Eigen::Index idx : group) {
            if (idx < 0 || idx >= k)
                throw std::out_of_range("build_modality_priors: expert index out of range");
            alpha[idx] += alpha_spec;
        }
        out.emplace(tag, DirichletPrior(std::move(alpha)));
    }
    return out;
}

} // namespace dpsl::shaping
