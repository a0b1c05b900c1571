#include "rdkin/errors.hpp"
#include "rdkin/measure_space.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rdkin;
using rdkin::testing::Gen;

namespace {

// Neumaier summation of mu_x f_x, independent of Eigen's dot product.
double compensated_mean(const FiniteMeasureSpace& sp, const StateFunction& f) {
    double sum = 0.0, c = 0.0;
    for (std::size_t x = 0; x < sp.size(); ++x) {
        const double term = sp.weight(x) * f(static_cast<Eigen::Index>(x));
        const double t = sum + term;
        c += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return sum + c;
}

double naive_entropy(const FiniteMeasureSpace& sp, const StateFunction& f) {
    double m = 0.0, flogf = 0.0;
    for (std::size_t x = 0; x < sp.size(); ++x) {
        const double v = f(static_cast<Eigen::Index>(x));
        m += sp.weight(x) * v;
        if (v > 0) flogf += sp.weight(x) * v * std::log(v);
    }
    return flogf - m * std::log(m);
}

}  // namespace

TEST(FiniteMeasureSpace, RejectsBadWeights) {
    EXPECT_THROW(FiniteMeasureSpace(Eigen::Vector2d(0.5, 0.0)), DomainError);
    EXPECT_THROW(FiniteMeasureSpace(Eigen::Vector2d(0.7, 0.7)), DomainError);
    EXPECT_THROW(FiniteMeasureSpace(Eigen::VectorXd()), StructuralError);
}

TEST(FiniteMeasureSpace, NormalizesSmallRoundoff) {
    FiniteMeasureSpace sp(Eigen::Vector3d(0.2, 0.3, 0.5 + 5e-10));
    EXPECT_NEAR(sp.weights().sum(), 1.0, 1e-15);
}

TEST(Integrate, ConstantOneIsOne) {
    Gen g(1);
    for (int n : {1, 3, 17}) {
        const auto sp = g.space(n);
        EXPECT_NEAR(integrate(sp, StateFunction::Ones(n)), 1.0, 1e-14);
    }
}

TEST(Integrate, IndicatorPicksWeight) {
    FiniteMeasureSpace sp(Eigen::Vector4d(0.25, 0.25, 0.4, 0.1));
    EXPECT_DOUBLE_EQ(integrate(sp, Eigen::Vector4d(1, 0, 0, 0)), 0.25);
}

TEST(Integrate, MatchesCompensatedSum) {
    Gen g(2);
    const auto sp = g.space(8);
    const auto f = g.function(8, -5.0, 5.0);
    EXPECT_NEAR(integrate(sp, f), compensated_mean(sp, f), 1e-14);
}

TEST(Integrate, DimensionMismatchThrows) {
    EXPECT_THROW(integrate(FiniteMeasureSpace::uniform(3), StateFunction::Ones(4)), StructuralError);
}

TEST(Integrate, LinearProperty) {
    Gen g(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = g.integer(1, 20);
        const auto sp = g.space(n);
        const auto f = g.function(n, -3, 3), h = g.function(n, -3, 3);
        const double a = g.uniform(-2, 2), b = g.uniform(-2, 2);
        const StateFunction comb = a * f + b * h;
        EXPECT_NEAR(integrate(sp, comb), a * integrate(sp, f) + b * integrate(sp, h), 1e-12);
    }
}

TEST(Entropy, ConstantHasZeroEntropy) {
    Gen g(4);
    const auto sp = g.space(6);
    EXPECT_NEAR(entropy(sp, StateFunction::Constant(6, 3.7)), 0.0, 1e-15);
}

TEST(Entropy, TwoPointDirectFormula) {
    const auto sp = FiniteMeasureSpace::uniform(2);
    const double expected = 0.5 * (1.0 * std::log(1.0) + 4.0 * std::log(4.0)) - 2.5 * std::log(2.5);
    EXPECT_NEAR(entropy(sp, Eigen::Vector2d(1, 4)), expected, 1e-14);
}

TEST(Entropy, ZeroLogZeroConvention) {
    const auto sp = FiniteMeasureSpace::uniform(2);
    EXPECT_NEAR(entropy(sp, Eigen::Vector2d(0, 2)), std::log(2.0), 1e-14);
}

TEST(Entropy, DomainErrors) {
    const auto sp = FiniteMeasureSpace::uniform(3);
    EXPECT_THROW(entropy(sp, Eigen::Vector3d(1, -0.1, 1)), DomainError);
    EXPECT_THROW(entropy(sp, Eigen::Vector3d(0, 0, 0)), DomainError);
}

TEST(Entropy, HomogeneityProperty) {
    Gen g(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = g.integer(2, 16);
        const auto sp = g.space(n);
        const auto f = g.function(n, 0.0, 3.0);
        const double c = g.uniform(0.01, 50.0);
        const double e = entropy(sp, f);
        EXPECT_NEAR(entropy(sp, c * f), c * e, 1e-12 * std::max(1.0, c * e));
    }
}

TEST(Entropy, NonnegativeAndMatchesNaive) {
    Gen g(6);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = g.integer(2, 12);
        const auto sp = g.space(n);
        const auto f = g.function(n, 0.0, 4.0);
        const double e = entropy(sp, f);
        EXPECT_GE(e, 0.0);
        EXPECT_NEAR(e, naive_entropy(sp, f), 1e-12);
    }
}

TEST(Entropy, StrictlyPositiveOffConstants) {
    Gen g(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = g.integer(2, 10);
        const auto sp = g.space(n);
        StateFunction f = StateFunction::Ones(n);
        f(g.integer(0, n - 1)) += g.uniform(1e-3, 1.0);
        EXPECT_GT(entropy(sp, f), 1e-10);
    }
}

TEST(ExpMoment, ZeroGivesOne) {
    Gen g(8);
    const auto sp = g.space(5);
    const auto m = exp_moment(sp, StateFunction::Zero(5), 2.0, 1.5);
    EXPECT_DOUBLE_EQ(m.value, 1.0);
    EXPECT_FALSE(m.overflowed());
}

TEST(ExpMoment, ConstantGivesExp) {
    Gen g(9);
    const auto sp = g.space(5);
    EXPECT_NEAR(exp_moment(sp, StateFunction::Constant(5, 1.3), 1.0, 1.0).value, std::exp(1.3), 1e-13);
}

TEST(ExpMoment, MatchesPerStateEvaluation) {
    Gen g(10);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = g.integer(1, 12);
        const auto sp = g.space(n);
        const auto f = g.function(n, -2, 2);
        const double gamma = g.uniform(0.1, 3.0), alpha = g.uniform(1.0, 3.0);
        double direct = 0.0;
        for (int x = 0; x < n; ++x)
            direct += sp.weight(static_cast<std::size_t>(x)) * std::exp(gamma * std::pow(std::abs(f(x)), alpha));
        EXPECT_NEAR(exp_moment(sp, f, gamma, alpha).value, direct, 1e-13 * direct);
    }
}

TEST(ExpMoment, OverflowIsFlagged) {
    const auto sp = FiniteMeasureSpace::uniform(3);
    const auto m = exp_moment(sp, Eigen::Vector3d(0.0, 40.0, 1.0), 1.0, 2.0);
    EXPECT_TRUE(m.overflowed());
    EXPECT_EQ(*m.overflow_state, 1u);
    EXPECT_TRUE(std::isinf(m.value));
    EXPECT_NEAR(m.log_value, 1600.0 - std::log(3.0), 1e-9);
}

TEST(ExpMoment, JensenLowerBoundProperty) {
    Gen g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = g.integer(1, 12);
        const auto sp = g.space(n);
        const auto f = g.function(n, -2, 2);
        const double gamma = g.uniform(0.1, 2.0), alpha = g.uniform(1.0, 2.5);
        const double jensen = std::exp(gamma * integrate(sp, abs_pow(f, alpha)));
        EXPECT_GE(exp_moment(sp, f, gamma, alpha).value, jensen * (1 - 1e-14));
        EXPECT_GE(exp_moment(sp, f, gamma, alpha).value, 1.0);
    }
}
