#include "dpsl/ffn.hpp"

#include <cmath>
#include <stdexcept>

namespace dpsl {

Eigen::MatrixXd apply_nonlinearity(const Eigen::MatrixXd& z, Nonlinearity act) {
    switch (act) {
        case Nonlinearity::SiLU:
            return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
        case Nonlinearity::Tanh:
            return z.array().tanh().matrix();
        case Nonlinearity::ReLU:
            return z.cwiseMax(0.0);
    }
    throw std::logic_error("apply_nonlinearity: unknown nonlinearity");
}

Eigen::MatrixXd GatedFFN::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != w_up.rows())
        throw std::invalid_argument("GatedFFN::forward: token dim does not match weights");
    const Eigen::MatrixXd gate = apply_nonlinearity(x * w_gate, act);
    return (gate.array() * (x * w_up).array()).matrix() * w_down;
}

} // namespace dpsl
