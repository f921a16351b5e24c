#pragma once

#include <vector>

#include <Eigen/Core>

#include "dpsl/rng.hpp"
#include "dpsl/specfun.hpp"

namespace dpsl {

/// A point on the probability simplex: nonnegative components summing to 1.
struct SimplexPoint {
    Eigen::VectorXd p;
};

/// Dirichlet prior over K >= 2 categories with positive concentrations.
class DirichletPrior {
public:
    explicit DirichletPrior(Eigen::VectorXd alpha);

    const Eigen::VectorXd& alpha() const { return alpha_; }
    double concentration_sum() const { return sum_; }
    Eigen::Index size() const { return alpha_.size(); }

    /// Beta marginal of component k: Beta(alpha_k, A - alpha_k).
    specfun::BetaParams marginal(Eigen::Index k) const;

    /// Log density at an interior simplex point.
    double log_pdf(const SimplexPoint& point) const;

    /// Sum concentrations over each group of a partition of {0..K-1}.
    DirichletPrior aggregate(const std::vector<std::vector<Eigen::Index>>& groups) const;

    /// Draw a simplex point as normalized Gamma variates.
    SimplexPoint sample(SplitMix64& rng) const;

private:
    Eigen::VectorXd alpha_;
    double sum_;
};

} // namespace dpsl
