#pragma once

#include <vector>

#include <Eigen/Core>

namespace dpsl {

enum class Nonlinearity { SiLU, Tanh, ReLU };

/// Gated feed-forward block: y = ( act(x W_gate) .* (x W_up) ) W_down.
struct GatedFFN {
    Eigen::MatrixXd w_up;   // d x h
    Eigen::MatrixXd w_gate; // d x h
    Eigen::MatrixXd w_down; // h x d
    Nonlinearity act = Nonlinearity::SiLU;

    Eigen::Index model_dim() const { return w_up.rows(); }
    Eigen::Index hidden_dim() const { return w_up.cols(); }

    /// Forward pass on a T x d token matrix.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

using ExpertSet = std::vector<GatedFFN>;

Eigen::MatrixXd apply_nonlinearity(const Eigen::MatrixXd& z, Nonlinearity act);

} // namespace dpsl
