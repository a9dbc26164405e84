#include <distlr/chebyshev.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace distlr;

TEST(Chebyshev, TinyIntervalIsConstant) {
    const auto m = cheb_exp(1e-12, 1e-6);
    EXPECT_EQ(m.degree, 0);
    EXPECT_NEAR(m(0.0), 1.0, 1e-6);
}

TEST(Chebyshev, TwentyAtOneEMinusNine) {
    const auto m = cheb_exp(20.0, 1e-9);
    EXPECT_LE(dense_sup_error(m), 1e-9);
    // one degree lower fails the same check
    EXPECT_GT(dense_sup_error(detail::interpolate_exp(20.0, m.degree - 1)), 1e-9);
    EXPECT_LE(m.degree, cheb_degree_cap(20.0, 1e-9));
    // independent spot checks off the sampling lattice
    for (double x : {0.0123, 1.7, 5.55, 13.3, 19.99})
        EXPECT_NEAR(m(x), std::exp(-x), 2e-9) << x;
}

TEST(Chebyshev, DegreeLogarithmicInEps) {
    // L = 3 ln(1/eps): the degree stays a bounded multiple of ln(1/eps)
    for (int t = 2; t <= 12; ++t) {
        const double eps = std::pow(10.0, -t);
        const double L   = 3.0 * std::log(1.0 / eps);
        const auto   m   = cheb_exp(L, eps);
        EXPECT_LE(dense_sup_error(m), eps);
        EXPECT_LE(m.degree, 4.0 * std::log(1.0 / eps)) << t;
    }
}

TEST(Chebyshev, DegreeNonDecreasing) {
    int prev = 0;
    for (int t = 1; t <= 13; ++t) {
        const auto m = cheb_exp(10.0, std::pow(10.0, -t));
        EXPECT_GE(m.degree, prev);
        prev = m.degree;
    }
}

TEST(Chebyshev, InputErrors) {
    EXPECT_THROW(cheb_exp(-1.0, 1e-6), domain_error);
    EXPECT_THROW(cheb_exp(1.0, 0.0), domain_error);
    EXPECT_THROW(cheb_exp(1.0, 1.5), domain_error);
    // below double precision the cap trips
    EXPECT_THROW(cheb_exp(50.0, 1e-18), builder_error);
}
