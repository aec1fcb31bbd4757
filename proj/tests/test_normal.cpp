#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "flip/normal.hpp"

using namespace flip;

TEST_CASE("normal cdf basics") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(10.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(normal_cdf(-10.0) == doctest::Approx(0.0).epsilon(1e-15));
    for (double x : {-3.0, -1.0, -0.2, 0.4, 1.7, 2.9})
        CHECK(normal_cdf(x) + normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normal pdf matches derivative of cdf") {
    const double h = 1e-6;
    for (double x : {-2.0, -0.5, 0.0, 0.3, 1.5}) {
        const double fd = (normal_cdf(x + h) - normal_cdf(x - h)) / (2 * h);
        CHECK(fd == doctest::Approx(normal_pdf(x)).epsilon(1e-8));
    }
}

TEST_CASE("normal quantile inverts the cdf") {
    // Reference values computed with an independent implementation.
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.2) == doctest::Approx(-0.8416212335729142).epsilon(1e-12));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    // The round trip is limited by the cdf saturating toward 1: above x ~ 6
    // the probability loses the upper-tail information. The lower tail keeps
    // full relative precision, so the grid is asymmetric.
    for (double x = -8.0; x <= 5.0; x += 0.25)
        CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
    CHECK_THROWS_AS(normal_quantile(-0.1), std::domain_error);
}

TEST_CASE("binormal cdf closed forms") {
    // Phi2(0, 0, rho) = 1/4 + asin(rho) / (2 pi).
    for (double rho : {-0.9, -0.5, 0.0, 0.3, 0.7, 0.99}) {
        const double expected = 0.25 + std::asin(rho) / (2.0 * M_PI);
        CHECK(binormal_cdf(0.0, 0.0, rho) == doctest::Approx(expected).epsilon(1e-12));
    }
    // Independence factorizes.
    CHECK(binormal_cdf(2.0, -1.0, 0.0) ==
          doctest::Approx(normal_cdf(2.0) * normal_cdf(-1.0)).epsilon(1e-14));
    CHECK(binormal_cdf(2.0, -1.0, 0.0) ==
          doctest::Approx(0.1550458259702445).epsilon(1e-12));
}

TEST_CASE("binormal cdf reference values") {
    // Frozen from an independent bivariate-normal implementation.
    CHECK(binormal_cdf(1.0, 0.5, 0.3) ==
          doctest::Approx(0.6093086777999954).epsilon(1e-10));
    CHECK(binormal_cdf(-0.5, 1.2, -0.6) ==
          doctest::Approx(0.22471318941951965).epsilon(1e-10));
    CHECK(binormal_cdf(0.3, 0.3, 0.85) ==
          doctest::Approx(0.5335963948038399).epsilon(1e-10));
}

TEST_CASE("binormal cdf limits and properties") {
    CHECK(binormal_cdf(0.7, -0.2, 1.0) ==
          doctest::Approx(std::min(normal_cdf(0.7), normal_cdf(-0.2))).epsilon(1e-14));
    CHECK(binormal_cdf(0.7, -0.2, -1.0) ==
          doctest::Approx(std::max(0.0, normal_cdf(0.7) + normal_cdf(-0.2) - 1.0))
              .epsilon(1e-14));
    CHECK(binormal_cdf(1.2, 1.5, 0.99) == binormal_cdf(1.5, 1.2, 0.99));
    // Monotone in rho.
    double prev = -1.0;
    for (double rho = -0.95; rho <= 0.96; rho += 0.05) {
        const double v = binormal_cdf(0.4, -0.8, rho);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= std::min(normal_cdf(0.4), normal_cdf(-0.8)) + 1e-12);
        prev = v;
    }
    CHECK_THROWS_AS(binormal_cdf(0.0, 0.0, 1.5), std::domain_error);
    CHECK_THROWS_AS(binormal_cdf(0.0, 0.0, -1.01), std::domain_error);
}
