#include <distlr/divergence.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace distlr;

namespace {

// reference values computed with 40-digit arithmetic
struct ThresholdOracle {
    double m, p, q, ratio;
};

constexpr ThresholdOracle lower_oracle[] = {
    {1e-8, 1.0001414246895314, 0.99985858531035079, 4.0000942825708799},
    {0.01, 1.1447168162432815, 0.86516524893316531, 4.0960024055780533},
    {0.1, 1.4794327174332244, 0.61681683179170517, 4.3165381935209754},
    {0.5, 2.0, 0.30170956268433601, 4.1691695968711092},
    {1.0, 2.0, 0.15859433956303936, 3.2277000215568513},
    {3.0, 2.0, 0.018660629088683342, 2.4558779106770691},
};

constexpr ThresholdOracle upper_oracle[] = {
    {1e-8, 0.99985858197713531, 1.0001414280229825, 3.9999057207624535},
    {0.01, 0.86195282236325689, 1.1481651223793947, 3.9073305192310656},
    {0.1, 0.58753961327278798, 1.5162211614250221, 3.7167474120541397},
    {0.25, 0.38240356960216003, 1.8827147525825948, 3.5630494906202521},
    {0.5, 0.18668230885083704, 2.0, 2.7412033679192428},
    {2.0, 0.0, 2.0, 1.0},
};

} // namespace

TEST(Divergence, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(eval(DivergenceKind::E, 1.0, 1.0), 0.0);
    EXPECT_NEAR(eval(DivergenceKind::E, 2.0, 1.0), 0.3862943611198906, 1e-15);
    EXPECT_NEAR(eval(DivergenceKind::E, 0.0, 0.7), 0.7, 1e-15);
    EXPECT_NEAR(eval(DivergenceKind::KL, 0.25, 0.75), 0.5493061443340549, 1e-15);
    EXPECT_NEAR(eval(DivergenceKind::KL, 0.0, 0.5), std::log(2.0), 1e-15);
    EXPECT_NEAR(eval(DivergenceKind::KL, 1.0, 0.25), std::log(4.0), 1e-15);
    EXPECT_NEAR(eval(DivergenceKind::EStar, 1.0, 2.0), eval(DivergenceKind::E, 2.0, 1.0), 1e-16);
}

TEST(Divergence, DomainErrors) {
    EXPECT_THROW(eval(DivergenceKind::E, 0.5, 0.0), domain_error);
    EXPECT_THROW(eval(DivergenceKind::E, -0.1, 1.0), domain_error);
    EXPECT_THROW(eval(DivergenceKind::KL, 0.5, 1.0), domain_error);
    EXPECT_THROW(eval(DivergenceKind::KL, 0.5, 0.0), domain_error);
    EXPECT_THROW(solve_thresholds(Regime::Lower, 0.0), domain_error);
    EXPECT_THROW(solve_thresholds(Regime::Upper, -1.0), domain_error);
}

TEST(Divergence, KlSplitsIntoTwoEs) {
    std::mt19937_64                        rng(7);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    for (int t = 0; t < 2000; ++t) {
        const double p = u(rng), q = u(rng);
        const double lhs = eval(DivergenceKind::KL, p, q);
        const double rhs = eval(DivergenceKind::E, p, q) + eval(DivergenceKind::EReflected, p, q);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, lhs));
    }
}

TEST(Divergence, NonNegativeAndZeroOnDiagonal) {
    std::mt19937_64                        rng(11);
    std::uniform_real_distribution<double> u(1e-3, 20.0);
    for (int t = 0; t < 2000; ++t) {
        const double p = u(rng), q = u(rng);
        EXPECT_GE(eval(DivergenceKind::E, p, q), 0.0);
        EXPECT_NEAR(eval(DivergenceKind::E, p, p), 0.0, 1e-14 * p);
        EXPECT_DOUBLE_EQ(eval(DivergenceKind::EStar, p, q), eval(DivergenceKind::E, q, p));
    }
}

TEST(Thresholds, ClosedFormRoots) {
    // ln(10) - 0.9 = M  ->  q = 0.1
    EXPECT_NEAR(solve_qm_lower(1.402585092994046), 0.1, 1e-12);
    // 0.5 ln 0.5 + 0.5 = M  ->  p = 0.5 in the upper regime
    EXPECT_NEAR(solve_thresholds_upper(0.1534264097200273).p_m, 0.5, 1e-12);
    EXPECT_NEAR(upper_qm_clamp_level, 0.3068528194400547, 1e-16);
    EXPECT_NEAR(lower_pm_clamp_level, 0.3862943611198906, 1e-16);
}

TEST(Thresholds, LowerRegimeMatchesOracle) {
    for (const auto &o : lower_oracle) {
        const auto t = solve_thresholds(Regime::Lower, o.m);
        EXPECT_NEAR(t.p_m, o.p, 1e-10) << "M=" << o.m;
        EXPECT_NEAR(t.q_m, o.q, 1e-10) << "M=" << o.m;
        EXPECT_NEAR(ratio(Regime::Lower, o.m), o.ratio, 1e-6 * o.ratio) << "M=" << o.m;
    }
}

TEST(Thresholds, UpperRegimeMatchesOracle) {
    for (const auto &o : upper_oracle) {
        const auto t = solve_thresholds(Regime::Upper, o.m);
        EXPECT_NEAR(t.p_m, o.p, 1e-10) << "M=" << o.m;
        EXPECT_NEAR(t.q_m, o.q, 1e-10) << "M=" << o.m;
        EXPECT_NEAR(ratio(Regime::Upper, o.m), o.ratio, 1e-6 * o.ratio) << "M=" << o.m;
    }
}

TEST(Thresholds, ResidualAtSolution) {
    for (double m : {1e-6, 1e-3, 0.05, 0.2, 0.3, 0.9}) {
        const auto lo = solve_thresholds(Regime::Lower, m);
        if (lo.p_m < 2.0)
            EXPECT_NEAR(eval(DivergenceKind::E, lo.p_m, 1.0), m, 1e-11);
        EXPECT_NEAR(eval(DivergenceKind::E, 1.0, lo.q_m), m, 1e-11);
        const auto up = solve_thresholds(Regime::Upper, m);
        EXPECT_NEAR(eval(DivergenceKind::E, up.p_m, 1.0), m, 1e-11);
        if (up.q_m < 2.0)
            EXPECT_NEAR(eval(DivergenceKind::E, 1.0, up.q_m), m, 1e-11);
    }
}

TEST(Thresholds, MonotoneInM) {
    double prev_lp = 1.0, prev_lq = 1.0, prev_up = 1.0, prev_uq = 1.0;
    for (int e = -80; e <= 40; ++e) {
        const double m  = std::pow(10.0, e / 10.0);
        const auto   lo = solve_thresholds(Regime::Lower, m);
        const auto   up = solve_thresholds(Regime::Upper, m);
        EXPECT_GE(lo.p_m, prev_lp);
        EXPECT_LE(lo.q_m, prev_lq);
        EXPECT_LE(up.p_m, prev_up);
        EXPECT_GE(up.q_m, prev_uq);
        prev_lp = lo.p_m, prev_lq = lo.q_m, prev_up = up.p_m, prev_uq = up.q_m;
    }
}

TEST(Thresholds, LargeMKeepsLogQ) {
    const auto t = solve_thresholds(Regime::Lower, 1e4);
    EXPECT_EQ(t.q_m, 0.0);
    EXPECT_NEAR(t.log_q_m, -10001.0, 1e-6);
    EXPECT_NEAR(ratio(Regime::Lower, 1e4), 2.000138629436112, 1e-9);
    EXPECT_NEAR(ratio(Regime::Upper, 1e4), 2e-4, 1e-15);
    EXPECT_NEAR(ratio(Regime::Upper, 1e8), 2e-8, 1e-19);
}

TEST(Thresholds, RatioLimits) {
    EXPECT_NEAR(ratio(Regime::Lower, 1e-8), 4.0, 0.08);
    EXPECT_NEAR(ratio(Regime::Upper, 1e-8), 4.0, 0.08);
    EXPECT_GE(ratio(Regime::Lower, 1e8), 2.0);
    EXPECT_LE(ratio(Regime::Lower, 1e8), 2.01);
    EXPECT_LE(ratio(Regime::Upper, 1e8), 1e-7);
}

TEST(Thresholds, RatioBoundedOnLogGrid) {
    for (int e = -80; e <= 80; ++e) {
        const double m = std::pow(10.0, e / 10.0);
        EXPECT_LE(ratio(Regime::Lower, m), 6.0) << m;
        EXPECT_LE(ratio(Regime::Upper, m), 6.0) << m;
        EXPECT_GT(ratio(Regime::Lower, m), 0.0) << m;
    }
}
