#include <doctest.h>

#include <cmath>

#include "dpsl/specfun.hpp"
#include "oracles.hpp"

using namespace dpsl::specfun;

TEST_CASE("log_gamma at known points") {
    CHECK(std::fabs(log_gamma(1.0)) <= 1e-12);
    CHECK(log_gamma(5.0) == doctest::Approx(3.1780538303479458).epsilon(1e-13));
    CHECK(log_gamma(0.5) == doctest::Approx(0.5723649429247001).epsilon(1e-13));
    CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(log_gamma(-1.0), std::domain_error);
    CHECK_THROWS_AS(log_gamma(std::nan("")), std::domain_error);
}

TEST_CASE("log_gamma matches std::lgamma over a wide range") {
    for (double x : {1e-3, 0.1, 0.4999, 0.75, 1.0, 2.5, 17.0, 123.4, 1e4, 1e6})
        CHECK(std::fabs(log_gamma(x) - std::lgamma(x)) <= 1e-12 * std::max(1.0, std::fabs(std::lgamma(x))));
}

TEST_CASE("log_beta") {
    CHECK(std::fabs(log_beta(1.0, 1.0)) <= 1e-14);
    CHECK(log_beta(2.0, 3.0) == doctest::Approx(-2.4849066497880004).epsilon(1e-13));
    CHECK(log_beta(0.5, 0.5) == doctest::Approx(1.1447298858494002).epsilon(1e-13));
    CHECK_THROWS_AS(log_beta(0.0, 1.0), std::domain_error);
    // exact symmetry of the computed expression
    for (double a : {0.3, 1.0, 2.7})
        for (double b : {0.9, 4.2})
            CHECK(log_beta(a, b) == log_beta(b, a));
}

TEST_CASE("beta_pdf values") {
    CHECK(beta_pdf(0.3, {1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(beta_pdf(0.5, {2.0, 2.0}) == doctest::Approx(1.5).epsilon(1e-13));
    // frozen scipy value for Beta(3, 1.5) at 0.2
    CHECK(beta_pdf(0.2, {3.0, 1.5}) == doctest::Approx(0.2347871376374779).epsilon(1e-12));
    CHECK_THROWS_AS(beta_pdf(0.0, {2.0, 2.0}), std::domain_error);
    CHECK_THROWS_AS(beta_pdf(1.0, {2.0, 2.0}), std::domain_error);
}

TEST_CASE("beta_cdf basics and frozen values") {
    CHECK(beta_cdf(0.5, {1.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(beta_cdf(0.5, {2.0, 2.0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(beta_cdf(0.0, {2.0, 5.0}) == 0.0);
    CHECK(beta_cdf(1.0, {2.0, 5.0}) == 1.0);
    // frozen scipy values
    CHECK(beta_cdf(0.3, {2.0, 5.0}) == doctest::Approx(0.5798250000000003).epsilon(1e-12));
    CHECK(beta_cdf(0.1, {0.5, 0.5}) == doctest::Approx(0.20483276469913345).epsilon(1e-12));
    CHECK(beta_cdf(0.7, {5.0, 3.0}) == doctest::Approx(0.6470695).epsilon(1e-12));
    CHECK(beta_cdf(0.25, {0.2, 0.2}) == doctest::Approx(0.41405551952147296).epsilon(1e-12));
    CHECK_THROWS_AS(beta_cdf(-0.1, {1.0, 1.0}), std::domain_error);
    CHECK_THROWS_AS(beta_cdf(1.1, {1.0, 1.0}), std::domain_error);
}

TEST_CASE("beta_cdf agrees with the quadrature oracle") {
    const double shapes[] = {0.2, 0.5, 0.75, 1.0, 1.5, 3.0, 5.0};
    for (double a : shapes)
        for (double b : shapes)
            for (double x : {0.01, 0.2, 0.5, 0.8, 0.99}) {
                const double ours = beta_cdf(x, {a, b});
                const double ref = oracles::beta_cdf_quadrature(x, a, b);
                CHECK(std::fabs(ours - ref) <= 1e-10);
            }
}

TEST_CASE("beta_cdf symmetry and monotonicity properties") {
    const double shapes[] = {0.5, 0.75, 1.0, 1.5, 3.0, 5.0};
    for (double a : shapes)
        for (double b : shapes) {
            double prev = -1.0;
            for (int i = 0; i <= 1000; ++i) {
                const double x = static_cast<double>(i) / 1000.0;
                const double f = beta_cdf(x, {a, b});
                CHECK(f >= prev);
                prev = f;
                CHECK(std::fabs(f - (1.0 - beta_cdf(1.0 - x, {b, a}))) <= 1e-10);
            }
        }
}

TEST_CASE("beta_cdf derivative matches beta_pdf") {
    const double shapes[] = {0.5, 0.75, 1.0, 1.5, 3.0, 5.0};
    const double step = 1e-6;
    for (double a : shapes)
        for (double b : shapes)
            for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
                const double fd =
                    (beta_cdf(x + step, {a, b}) - beta_cdf(x - step, {a, b})) / (2.0 * step);
                const double pdf = beta_pdf(x, {a, b});
                CHECK(std::fabs(fd - pdf) <= 1e-5 * std::max(1.0, std::fabs(pdf)));
            }
}
