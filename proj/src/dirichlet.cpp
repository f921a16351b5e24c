#include "dpsl/dirichlet.hpp"

#include <cmath>
#include <stdexcept>

namespace dpsl {

DirichletPrior::DirichletPrior(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2)
        throw std::invalid_argument("DirichletPrior: need at least 2 components");
    for (Eigen::Index i = 0; i < alpha_.size(); ++i)
        if (!(alpha_[i] > 0.0) || !std::isfinite(alpha_[i]))
            throw std::domain_error("DirichletPrior: concentrations must be positive");
    sum_ = alpha_.sum();
}

specfun::BetaParams DirichletPrior::marginal(Eigen::Index k) const {
    if (k < 0 || k >= alpha_.size())
        throw std::out_of_range("DirichletPrior::marginal: index out of range");
    return {alpha_[k], sum_ - alpha_[k]};
}

double DirichletPrior::log_pdf(const SimplexPoint& point) const {
    if (point.p.size() != alpha_.size())
        throw std::invalid_argument("DirichletPrior::log_pdf: dimension mismatch");
    double log_b = -specfun::log_gamma(sum_);
    for (Eigen::Index k = 0; k < alpha_.size(); ++k)
        log_b += specfun::log_gamma(alpha_[k]);
    double acc = -log_b;
    for (Eigen::Index k = 0; k < alpha_.size(); ++k)
        acc += (alpha_[k] - 1.0) * std::log(point.p[k]);
    return acc;
}

DirichletPrior DirichletPrior::aggregate(
    const std::vector<std::vector<Eigen::Index>>& groups) const {
    if (groups.size() < 2)
        throw std::invalid_argument("aggregate: need at least 2 groups");
    std::vector<bool> seen(static_cast<std::size_t>(alpha_.size()), false);
    Eigen::VectorXd out(static_cast<Eigen::Index>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty())
            throw std::invalid_argument("aggregate: empty group");
        double s = 0.0;
        for (Eigen::Index idx : groups[g]) {
            if (idx < 0 || idx >= alpha_.size() || seen[static_cast<std::size_t>(idx)])
                throw std::invalid_argument("aggregate: groups must partition the index set");
            seen[static_cast<std::size_t>(idx)] = true;
            s += alpha_[idx];
        }
        out[static_cast<Eigen::Index>(g)] = s;
    }
    for (bool b : seen)
        if (!b)
            throw std::invalid_argument("aggregate: groups must cover every index");
    return DirichletPrior(std::move(out));
}

SimplexPoint DirichletPrior::sample(SplitMix64& rng) const {
    Eigen::VectorXd g(alpha_.size());
    for (Eigen::Index k = 0; k < alpha_.size(); ++k)
        g[k] = rng.gamma(alpha_[k]);
    const double total = g.sum();
    return SimplexPoint{g / total};
}

} // namespace dpsl
