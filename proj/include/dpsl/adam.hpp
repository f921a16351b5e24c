#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace dpsl {

/// Bias-corrected Adam state for one parameter matrix.
struct AdamState {
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
    long t = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_shape(Eigen::Index rows, Eigen::Index cols, double lr) {
        AdamState s;
        s.m = Eigen::MatrixXd::Zero(rows, cols);
        s.v = Eigen::MatrixXd::Zero(rows, cols);
        s.lr = lr;
        return s;
    }
};

inline void adam_step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grads, AdamState& state) {
    if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
        params.rows() != state.m.rows() || params.cols() != state.m.cols())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (!grads.allFinite())
        throw std::domain_error("adam_step: non-finite gradient");
    state.t += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v.array().matrix() +
              (1.0 - state.beta2) * grads.array().square().matrix();
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const Eigen::ArrayXXd m_hat = state.m.array() / bc1;
    const Eigen::ArrayXXd v_hat = state.v.array() / bc2;
    params.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
}

/// Softmax Jacobian-transpose product for one row:
/// grad_logit_i = p_i * (g_i - sum_j p_j g_j).
inline Eigen::VectorXd softmax_chain(const Eigen::VectorXd& probs, const Eigen::VectorXd& upstream) {
    const double dot = probs.dot(upstream);
    return (probs.array() * (upstream.array() - dot)).matrix();
}

} // namespace dpsl
