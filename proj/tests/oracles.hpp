// Independent oracles used by the tests. These deliberately avoid the
// library's own code paths: quadrature instead of the continued fraction,
// std::lgamma instead of the Lanczos routine, naive loops instead of the
// vectorized implementations.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracles {

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double eps) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson(f, a, b, fa, fm, fb), eps, 48);
}

/// Beta CDF by adaptive Simpson quadrature of the density.
/// Shapes below 1 are handled by the substitution t = v^(1/a), which makes
/// the integrand bounded; x above the mean uses the symmetry complement.
inline double beta_cdf_quadrature(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > a / (a + b))
        return 1.0 - beta_cdf_quadrature(1.0 - x, b, a);
    const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double integral;
    if (a >= 1.0) {
        auto f = [&](double t) {
            if (t <= 0.0) return a > 1.0 ? 0.0 : std::pow(1.0 - t, b - 1.0);
            return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0);
        };
        integral = adaptive_simpson(f, 0.0, x, 1e-13);
    } else {
        auto f = [&](double v) {
            const double t = std::pow(v, 1.0 / a);
            return std::pow(1.0 - t, b - 1.0) / a;
        };
        integral = adaptive_simpson(f, 0.0, std::pow(x, a), 1e-13);
    }
    return integral * std::exp(-log_b);
}

inline double beta_pdf_reference(double x, double a, double b) {
    const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_b);
}

/// Two-sided Kolmogorov-Smirnov distance of samples against a CDF.
inline double ks_distance(std::vector<double> samples,
                          const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const double f = cdf(samples[j]);
        d = std::max(d, std::fabs(static_cast<double>(j + 1) / n - f));
        d = std::max(d, std::fabs(static_cast<double>(j) / n - f));
    }
    return d;
}

/// Line-by-line reimplementation of the shaping loss with naive loops.
/// `cdf(p, k, tag)` supplies the target marginal CDF.
inline double dpsl_brute_force(
    const std::vector<std::vector<double>>& probs, const std::vector<std::string>& tags,
    double lambda, double clamp_eps,
    const std::function<double(double, std::size_t, const std::string&)>& cdf) {
    std::vector<std::string> order;
    for (const auto& t : tags)
        if (std::find(order.begin(), order.end(), t) == order.end())
            order.push_back(t);
    if (order.empty())
        order.emplace_back("");
    const std::size_t k_count = probs.front().size();
    double total = 0.0;
    for (const auto& tag : order) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < probs.size(); ++r)
            if (tags.empty() || tags[r] == tag)
                rows.push_back(r);
        const double b = static_cast<double>(rows.size());
        for (std::size_t k = 0; k < k_count; ++k) {
            std::vector<double> col;
            for (std::size_t r : rows)
                col.push_back(std::clamp(probs[r][k], clamp_eps, 1.0 - clamp_eps));
            std::sort(col.begin(), col.end());
            for (std::size_t j = 1; j <= col.size(); ++j) {
                const double diff =
                    static_cast<double>(j) / b - cdf(col[j - 1], k, tag);
                total += diff * diff / b;
            }
        }
    }
    return lambda * total;
}

/// Textbook Adam on a flat parameter vector, for trace comparison.
struct ReferenceAdam {
    std::vector<double> m, v;
    long t = 0;
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit ReferenceAdam(std::size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}

    void step(std::vector<double>& params, const std::vector<double>& grads) {
        ++t;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            const double mh = m[i] / (1.0 - std::pow(beta1, t));
            const double vh = v[i] / (1.0 - std::pow(beta2, t));
            params[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

} // namespace oracles
