#pragma once

#include <stdexcept>

namespace dpsl::specfun {

/// Shape parameters of a Beta distribution. Both must be strictly positive.
struct BetaParams {
    double a;
    double b;

    BetaParams(double a_, double b_) : a(a_), b(b_) {
        if (!(a > 0.0) || !(b > 0.0))
            throw std::domain_error("BetaParams: shapes must be positive");
    }
};

/// ln Gamma(x) for x > 0. Lanczos approximation (g = 7, 9 coefficients),
/// reflection formula below 0.5.
double log_gamma(double x);

/// ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b).
double log_beta(double a, double b);

/// Beta density at x in (0, 1), evaluated via exp(log-density).
double beta_pdf(double x, const BetaParams& p);

/// Regularized incomplete beta I_x(a, b), i.e. the Beta CDF.
/// Continued fraction (modified Lentz), complement switch at
/// x > (a+1)/(a+b+2). Throws std::runtime_error if the fraction fails
/// to converge within the iteration cap.
double beta_cdf(double x, const BetaParams& p);

} // namespace dpsl::specfun
