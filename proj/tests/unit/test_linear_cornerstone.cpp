#include "rdkin/errors.hpp"
#include "rdkin/linear_cornerstone.hpp"
#include "rdkin/oracle.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rdkin;
using rdkin::testing::Gen;

namespace {

Field heat_field(const Generator& gen, const StateFunction& f, const TimeGrid& grid) {
    return Field::from_function(grid, gen.size(), [&](double t) { return semigroup_apply(gen, t, f); });
}

// Time-constant random coefficients on a 16-site ring.
CornerstoneProblem reference_problem(const TimeGrid& grid, std::uint64_t seed = 7) {
    Gen g(seed);
    const auto ring = Generator::ring(16, 1.0);
    const auto a = g.function(16, 0.0, 0.5), b = g.function(16, 0.0, 0.5), f = g.function(16, 0.0, 1.0);
    return {ring, Field::constant(grid, a), Field::constant(grid, b), f};
}

}  // namespace

TEST(TimeGrid, NodesAndRefinement) {
    const TimeGrid g(0.3, 7);
    EXPECT_DOUBLE_EQ(g.dt(), 0.3 / 7);
    EXPECT_EQ(g.time(7), 0.3);
    EXPECT_EQ(g.refined(3).steps(), 21);
    EXPECT_THROW(TimeGrid(0.0, 3), DomainError);
    EXPECT_THROW(TimeGrid(1.0, 0), DomainError);
}

TEST(Field, InterpolatesLinearly) {
    const TimeGrid g(1.0, 4);
    const auto fld = Field::from_function(g, 2, [](double t) { return Eigen::Vector2d(t, 1 - 2 * t); });
    const auto mid = fld.at(0.6);
    EXPECT_NEAR(mid(0), 0.6, 1e-15);
    EXPECT_NEAR(mid(1), -0.2, 1e-15);
    Field f2(g, 2);
    EXPECT_THROW(f2.set_slice(0, StateFunction::Ones(3)), StructuralError);
}

TEST(SolveMollified, NoPotentialIsPureSemigroup) {
    Gen g(1);
    const auto gen = g.reversible(8);
    const TimeGrid grid(1.0, 50);
    const auto f = g.gaussian(8);
    const CornerstoneProblem p{gen, Field(grid, 8), Field(grid, 8), f};
    const auto sol = solve_mollified(p, 1e-3);
    EXPECT_LT(sup_distance(sol.u, heat_field(gen, f, grid)), 1e-12);
}

TEST(SolveMollified, ConstantPotentialClosedForm) {
    // u' = L u - a P_eps u, mode by mode exp(t (lambda_i - a e^{lambda_i eps}))
    const auto ring = Generator::ring(16, 1.0);
    Gen g(2);
    const auto f = g.function(16, 0.0, 1.0);
    const double a = 1.0, eps = 1e-4, t = 0.5;
    const TimeGrid grid(t, 512);
    const CornerstoneProblem p{ring, Field::constant(grid, StateFunction::Constant(16, a)), Field(grid, 16), f};
    const auto sol = solve_mollified(p, eps);
    const Eigen::MatrixXd v = ring.eigenfunctions();
    const Eigen::VectorXd& lam = ring.eigenvalues();
    StateFunction exact = StateFunction::Zero(16);
    for (int i = 0; i < 16; ++i) {
        const double coef = integrate(ring.space(), v.col(i).cwiseProduct(f));
        exact += coef * std::exp(t * (lam(i) - a * std::exp(lam(i) * eps))) * v.col(i);
    }
    EXPECT_LT((sol.u.slice(512) - exact).cwiseAbs().maxCoeff(), 1e-6);
    // and it sits O(eps) away from the unmollified e^{-a t} P_t f
    const StateFunction plain = std::exp(-a * t) * semigroup_apply(ring, t, f);
    EXPECT_LT((sol.u.slice(512) - plain).cwiseAbs().maxCoeff(), 10 * eps);
}

TEST(SolveMollified, Errors) {
    const TimeGrid grid(0.5, 50);
    const auto p = reference_problem(grid);
    EXPECT_THROW(solve_mollified(p, -1e-3), DomainError);
    EXPECT_THROW(solve_mollified(p, 1e-3, 1, 1e-30), ConvergenceError);
}

TEST(SolveMollified, DuhamelSelfConsistency) {
    const TimeGrid grid(0.5, 40);
    const auto p = reference_problem(grid, 3);
    const double eps = 1e-2;
    const auto sol = solve_mollified(p, eps, 200, 1e-13);
    double worst = 0.0;
    for (int k = 0; k <= grid.steps(); ++k) {
        const double t = grid.time(k);
        StateFunction rhs = semigroup_apply(p.gen, t, p.f);
        for (int j = 0; j <= k; ++j) {
            const double w = (j == 0 || j == k ? 0.5 : 1.0) * grid.dt() * (k > 0);
            const StateFunction src = -p.a.slice(j).cwiseProduct(sol.u.slice(j)) + p.b.slice(j);
            rhs += w * semigroup_apply(p.gen, eps + t - grid.time(j), src);
        }
        worst = std::max(worst, (sol.u.slice(k) - rhs).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-11);
}

TEST(SolveMollified, GapsContractGeometrically) {
    const TimeGrid grid(1.0, 100);
    const auto p = reference_problem(grid, 4);
    const auto sol = solve_mollified(p, 1e-2);
    const auto& gaps = sol.report.gaps;
    ASSERT_GE(gaps.size(), 3u);
    for (std::size_t n = 2; n < gaps.size(); ++n)
        if (gaps[n - 1] > 1e-14) EXPECT_LT(gaps[n], gaps[n - 1]);
}

TEST(SolveCornerstone, NoPotentialIsPureSemigroup) {
    Gen g(5);
    const auto gen = g.reversible(10);
    const TimeGrid grid(2.0, 20);
    const auto f = g.gaussian(10);
    const CornerstoneProblem p{gen, Field(grid, 10), Field(grid, 10), f};
    EXPECT_LT(sup_distance(solve_cornerstone(p), heat_field(gen, f, grid)), 1e-12);
}

TEST(SolveCornerstone, ZeroGeneratorIsScalarOde) {
    Gen g(6);
    const Generator zero(FiniteMeasureSpace::uniform(5), Eigen::MatrixXd::Zero(5, 5));
    const TimeGrid grid(1.5, 15);
    StateFunction a = g.function(5, 0.0, 2.0), b = g.function(5, 0.0, 1.0), f = g.function(5, 0.0, 1.0);
    a(0) = 0.0;  // the a -> 0 limit
    const CornerstoneProblem p{zero, Field::constant(grid, a), Field::constant(grid, b), f};
    const auto u = solve_cornerstone(p);
    for (int k = 0; k <= grid.steps(); ++k) {
        const double t = grid.time(k);
        for (int x = 0; x < 5; ++x) {
            const double exact = a(x) == 0.0 ? f(x) + b(x) * t
                                             : std::exp(-a(x) * t) * f(x) - std::expm1(-a(x) * t) * b(x) / a(x);
            EXPECT_NEAR(u.values()(x, k), exact, 1e-13);
        }
    }
}

TEST(SolveCornerstone, MatchesOracleAtMillisecondStep) {
    const TimeGrid grid(1.0, 1000);
    const auto p = reference_problem(grid);
    const auto u = solve_cornerstone(p);
    const auto ref = cornerstone_reference(p.gen.matrix(), p.a, p.b, p.f);
    EXPECT_LE(sup_distance(u, ref), 1e-7);
}

TEST(SolveCornerstone, SecondOrderInTime) {
    Gen g(8);
    const auto ring = Generator::ring(12, 1.0);
    const auto a0 = g.function(12, 0.5, 1.5), b0 = g.function(12, 0.0, 1.0), f = g.function(12, 0.0, 1.0);
    const TimeGrid grid(1.0, 20);
    auto a = Field::from_function(grid, 12, [&](double t) { return StateFunction(a0 * (1 + 0.5 * std::sin(3 * t))); });
    auto b = Field::from_function(grid, 12, [&](double t) { return StateFunction(b0 * (1 + t * t)); });
    const CornerstoneProblem p{ring, a, b, f};
    // oracle with the same piecewise-linear coefficients
    const auto ref = cornerstone_reference(ring.matrix(), a, b, f);
    double prev = 0.0;
    for (int s : {2, 4, 8, 16}) {
        const double err = sup_distance(solve_cornerstone(p, s), ref);
        if (prev > 0) EXPECT_NEAR(prev / err, 4.0, 0.4);
        prev = err;
    }
}

TEST(SolveCornerstone, LinearInDataAndSource) {
    Gen g(9);
    const auto gen = g.reversible(7);
    const TimeGrid grid(1.0, 30);
    const auto a = Field::constant(grid, g.function(7, 0, 1));
    const auto b1 = Field::constant(grid, g.gaussian(7)), b2 = Field::constant(grid, g.gaussian(7));
    const auto f1 = g.gaussian(7), f2 = g.gaussian(7);
    Field b12(grid, 7);
    b12.values() = b1.values() + b2.values();
    const auto u1 = solve_cornerstone({gen, a, b1, f1}, 2);
    const auto u2 = solve_cornerstone({gen, a, b2, f2}, 2);
    const auto u12 = solve_cornerstone({gen, a, b12, f1 + f2}, 2);
    EXPECT_LT((u12.values() - u1.values() - u2.values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SolveCornerstone, PreservesNonnegativity) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const TimeGrid grid(1.0, 100);
        auto p = reference_problem(grid, seed);
        p.f(3) = 0.0;
        EXPECT_GE(nonnegativity_check(solve_cornerstone(p)), -1e-10);
    }
}

TEST(AffineFlow, StableAtZeroPotential) {
    const auto u = affine_flow(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 1e-300), Eigen::Vector2d(3, 3), 0.5);
    EXPECT_NEAR(u(0), 2.5, 1e-15);
    EXPECT_NEAR(u(1), 3.5, 1e-15);
}

TEST(Steklov, ConstantField) {
    const TimeGrid grid(1.0, 10);
    const auto fld = Field::constant(grid, Eigen::Vector3d(1, 2, 3));
    const auto avg = steklov_average(fld, 0.3);
    for (int k = 0; k <= 10; ++k) {
        const bool inside = grid.time(k) <= 0.7 + 1e-12;
        EXPECT_NEAR(avg.values()(1, k), inside ? 2.0 : 0.0, 1e-14);
    }
}

TEST(Steklov, LinearFieldShiftsByHalfStep) {
    const TimeGrid grid(1.0, 16);
    const auto fld = Field::from_function(grid, 1, [](double t) { return (StateFunction(1) << t).finished(); });
    const auto avg = steklov_average(fld, grid.dt());
    for (int k = 0; k < 16; ++k) EXPECT_NEAR(avg.values()(0, k), grid.time(k) + grid.dt() / 2, 1e-14);
    EXPECT_EQ(avg.values()(0, 16), 0.0);
}

TEST(Steklov, ConvergesAtRateH) {
    Gen g(10);
    const TimeGrid grid(1.0, 64);
    Field fld(grid, 4);
    fld.values() = Eigen::MatrixXd::NullaryExpr(4, 65, [&] { return g.uniform(-1, 1); });
    double lip = 0.0;
    for (int k = 0; k < 64; ++k)
        lip = std::max(lip, (fld.slice(k + 1) - fld.slice(k)).cwiseAbs().maxCoeff() / grid.dt());
    for (int m : {8, 4, 2, 1}) {
        const double h = m * grid.dt();
        const auto avg = steklov_average(fld, h);
        double gap = 0.0;
        for (int k = 0; k + m <= 64; ++k)
            gap = std::max(gap, (avg.slice(k) - fld.slice(k)).cwiseAbs().maxCoeff());
        EXPECT_LE(gap, lip * h + 1e-12);
    }
}

TEST(Steklov, MisalignedWidthThrows) {
    const TimeGrid grid(1.0, 10);
    EXPECT_THROW(steklov_average(Field(grid, 2), 0.15), DomainError);
    EXPECT_THROW(steklov_average(Field(grid, 2), 2.0), DomainError);
}

TEST(Nonnegativity, ReportsSignFaithfully) {
    const auto ring = Generator::ring(6, 1.0);
    const TimeGrid grid(1.0, 10);
    const StateFunction pos = (Eigen::VectorXd(6) << 0, 1, 0, 2, 0, 0).finished();
    EXPECT_GE(nonnegativity_check(solve_cornerstone({ring, Field(grid, 6), Field(grid, 6), pos})), -1e-12);
    StateFunction neg = pos;
    neg(2) = -0.25;
    EXPECT_NEAR(nonnegativity_check(solve_cornerstone({ring, Field(grid, 6), Field(grid, 6), neg})), -0.25, 1e-15);
}

TEST(UniformBound, ZeroProblem) {
    const auto ring = Generator::ring(6, 1.0);
    const TimeGrid grid(1.0, 20);
    const CornerstoneProblem p{ring, Field(grid, 6), Field(grid, 6), StateFunction::Zero(6)};
    const auto rep = solve_mollified(p, 1e-2).report;
    const auto ub = uniform_bound_check(rep, p, 2.0, 1.0);
    EXPECT_EQ(ub.theta_sup, 0.0);
    EXPECT_EQ(ub.budget, 0.0);
    EXPECT_TRUE(ub.holds());
}

TEST(UniformBound, HeatFlowEnergyIdentity) {
    Gen g(11);
    const auto ring = Generator::ring(8, 1.0);
    const double c_ls = estimate_lsi_constant(ring, 10, 1e-12).constant;
    const TimeGrid grid(1.0, 100);
    const auto f = g.gaussian(8);
    const CornerstoneProblem p{ring, Field(grid, 8), Field(grid, 8), f};
    const auto ub = uniform_bound_check(solve_mollified(p, 1e-2).report, p, 2 * c_ls, c_ls);
    EXPECT_LE(ub.theta_sup, integrate(ring.space(), f.cwiseProduct(f)) * (1 + 1e-6));
    EXPECT_TRUE(ub.holds());
}

TEST(UniformBound, ReferenceScenario) {
    const TimeGrid grid(1.0, 200);
    const auto p = reference_problem(grid);
    const double c_ls = estimate_lsi_constant(p.gen, 10, 1e-12).constant;
    const auto ub = uniform_bound_check(solve_mollified(p, 1e-2).report, p, 2 * c_ls, c_ls);
    EXPECT_TRUE(ub.holds());
    EXPECT_GT(ub.budget, 0.0);
    EXPECT_NEAR(ub.kappa_gamma, 0.75, 1e-15);
    RecordProperty("theta_over_budget", std::to_string(ub.theta_sup / ub.budget));
    EXPECT_THROW(uniform_bound_check(solve_mollified(p, 1e-2).report, p, c_ls, c_ls), DomainError);
}

TEST(WeakResidual, HeatFlowWithConstantTest) {
    Gen g(12);
    const auto gen = g.reversible(9);
    const TimeGrid grid(1.0, 50);
    const auto u = heat_field(gen, g.gaussian(9), grid);
    // constant in time and space: only mass conservation is left, which the exact semigroup keeps
    const PolynomialTest test{{1.0}, StateFunction::Ones(9)};
    EXPECT_LE(weak_residual(gen, u, Field(grid, 9), Field(grid, 9), test), 1e-10);
    // a non-constant psi leaves the trapezoid error of int E(u, psi)
    const PolynomialTest wavy{{1.0}, g.gaussian(9)};
    const TimeGrid fine(1.0, 100);
    const double coarse = weak_residual(gen, u, Field(grid, 9), Field(grid, 9), wavy);
    const double refined = weak_residual(gen, heat_field(gen, u.slice(0), fine), Field(fine, 9), Field(fine, 9), wavy);
    EXPECT_NEAR(coarse / refined, 4.0, 0.2);
}

TEST(WeakResidual, ZeroFieldIsExactlyZero) {
    const auto ring = Generator::ring(5, 1.0);
    const TimeGrid grid(1.0, 10);
    const PolynomialTest test{{1.0, 2.0}, StateFunction::Ones(5)};
    EXPECT_EQ(weak_residual(ring, Field(grid, 5), Field(grid, 5), Field(grid, 5), test), 0.0);
}

TEST(WeakResidual, SecondOrderUnderHalving) {
    Gen g(13);
    const auto ring = Generator::ring(16, 1.0);
    const auto a0 = g.function(16, 0, 0.5), b0 = g.function(16, 0, 0.5), f = g.function(16, 0, 1);
    const PolynomialTest test{{1.0, 0.5, -0.3}, g.gaussian(16)};
    double prev = 0.0;
    for (int steps : {25, 50, 100, 200}) {
        const TimeGrid grid(1.0, steps);
        const CornerstoneProblem p{ring, Field::constant(grid, a0), Field::constant(grid, b0), f};
        const double r = weak_residual(ring, solve_cornerstone(p), p.a, p.b, test);
        if (prev > 0) EXPECT_NEAR(prev / r, 4.0, 0.4);
        prev = r;
    }
}
