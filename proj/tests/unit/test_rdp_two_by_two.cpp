#include "rdkin/errors.hpp"
#include "rdkin/oracle.hpp"
#include "rdkin/rdp_two_by_two.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

using namespace rdkin;

namespace {

TwoByTwoProblem random_problem(std::uint64_t seed, double lambda, double high, std::size_t n = 16,
                               double c1 = 1.0, double c2 = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, high);
    TwoByTwoProblem p{Generator::ring(n, 1.0), c1, c2, lambda, {}};
    for (auto& fi : p.f) {
        fi.resize(static_cast<Eigen::Index>(n));
        for (Eigen::Index x = 0; x < fi.size(); ++x) fi(x) = u(rng);
    }
    return p;
}

TwoByTwoProblem reference() { return random_problem(42, 0.3, 2.0); }

TwoByTwoProblem equilibrium(double lambda = 1.0) {
    TwoByTwoProblem p{Generator::ring(8, 1.0), 1.0, 1.5, lambda, {}};
    for (auto& fi : p.f) fi = StateFunction::Ones(8);
    return p;
}

double ring_lsi(std::size_t n) {
    static std::map<std::size_t, double> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, estimate_lsi_constant(Generator::ring(n, 1.0), 16, 1e-12).constant).first;
    return it->second;
}

Species oracle(const TwoByTwoProblem& p, const TimeGrid& grid) {
    const Eigen::MatrixXd l1 = p.c1 * p.gen.matrix(), l2 = p.c2 * p.gen.matrix();
    return mass_action_reference({l1, l2, l1, l2}, {1, 1, 0, 0}, {0, 0, 1, 1}, std::vector<double>(4, p.lambda),
                                 {p.f[0], p.f[1], p.f[2], p.f[3]}, grid);
}

double gap(const Species& a, const Species& b) {
    double g = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, sup_distance(a[i], b[i]));
    return g;
}

}  // namespace

TEST(ChooseGamma, Formula) {
    TwoByTwoProblem p{Generator::ring(4, 1.0), 1.0, 1.0, 1.0, {}};
    EXPECT_DOUBLE_EQ(choose_gamma(p, 1.0), 8.0);
    p.c1 = 4.0;
    p.c2 = 5.0;
    p.lambda = 0.5;
    EXPECT_DOUBLE_EQ(choose_gamma(p, 2.0), 2.0);
}

TEST(ChooseGamma, ReferenceKappaPositive) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    EXPECT_GT(p.min_c() - 2 * p.lambda * c / g, 0.0);
}

TEST(Validate, RejectsBadData) {
    auto p = equilibrium();
    p.f[2](3) = -0.1;
    EXPECT_THROW(p.validate(), DomainError);
    auto q = equilibrium();
    q.c2 = 0.0;
    EXPECT_THROW(q.validate(), DomainError);
}

TEST(DecoupledStep, EquilibriumIsFixed) {
    const auto p = equilibrium();
    const TimeGrid grid(0.5, 50);
    auto u = heat_flows(p, grid);
    for (int n = 0; n < 3; ++n) {
        u = decoupled_step(p, u, grid);
        for (const auto& ui : u) EXPECT_LT((ui.values().array() - 1.0).abs().maxCoeff(), 1e-13);
    }
}

TEST(DecoupledStep, NoReactionGivesHeatFlows) {
    const auto p = random_problem(3, 0.0, 2.0);
    const TimeGrid grid(0.5, 50);
    const auto heat = heat_flows(p, grid);
    const auto u = decoupled_step(p, heat, grid);
    for (int i = 0; i < 4; ++i) {
        for (int k = 0; k <= grid.steps(); ++k) {
            const StateFunction exact = semigroup_apply(p.species_generator(i), grid.time(k), p.f[i]);
            EXPECT_LT((u[i].slice(k) - exact).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(DecoupledStep, FirstStepMatchesAffineOracle) {
    const auto p = reference();
    const TimeGrid grid(0.125, 125);
    const auto heat = heat_flows(p, grid);
    const auto sums = paired_sums(p, grid);
    const auto u1 = decoupled_step(p, heat, grid);
    // u_i' = C_i L u_i - lambda S_j u_i + lambda S_i u_partner
    const int partner[4] = {3, 2, 1, 0};
    for (int i = 0; i < 4; ++i) {
        Field a(grid, 16), b(grid, 16);
        a.values() = p.lambda * sums[static_cast<std::size_t>(1 - i % 2)].values();
        b.values() = p.lambda * sums[static_cast<std::size_t>(i % 2)].values().cwiseProduct(heat[partner[i]].values());
        const auto ref = cornerstone_reference(p.species_generator(i).matrix(), a, b, p.f[i]);
        EXPECT_LE(sup_distance(u1[i], ref), 1e-7) << "component " << i + 1;
    }
}

TEST(Iterate, EquilibriumConvergesImmediately) {
    const auto p = equilibrium();
    const double c = ring_lsi(8);
    const double g = choose_gamma(p, c);
    const TimeGrid grid(auto_select_T(p, g, c), 100);
    const auto sol = iterate(p, grid, g, c);
    EXPECT_EQ(sol.report.n_converged, 1);
    EXPECT_LE(sol.report.sigma.front(), 1e-12);
}

TEST(Iterate, NoReactionConvergesImmediately) {
    const auto p = random_problem(4, 0.0, 2.0);
    const double c = ring_lsi(16);
    const TimeGrid grid(1.0, 100);
    const auto sol = iterate(p, grid, choose_gamma(p, c), c);
    EXPECT_EQ(sol.report.n_converged, 1);
    EXPECT_DOUBLE_EQ(sol.report.eta_predicted, 0.0);
    EXPECT_LT(gap(sol.u, heat_flows(p, grid)), 1e-12);
}

TEST(Iterate, ZeroDatumIsZero) {
    auto p = equilibrium();
    for (auto& fi : p.f) fi.setZero();
    const double c = ring_lsi(8);
    const auto sol = iterate(p, TimeGrid(1.0, 10), choose_gamma(p, c), c);
    for (const auto& ui : sol.u) EXPECT_EQ(ui.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Iterate, ReferenceMatchesOracle) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const double T = auto_select_T(p, g, c);
    const TimeGrid grid(T, static_cast<int>(std::lround(T / 1e-3)));
    const auto sol = iterate(p, grid, g, c);
    EXPECT_LE(gap(sol.u, oracle(p, grid)), 1e-5);
    EXPECT_LT(eta_T(p.lambda, g, constant_D(p, g), c, T), 1.0);
}

TEST(Iterate, RefusesLargeHorizon) {
    const auto p = reference();
    const double c = ring_lsi(16);
    try {
        iterate(p, TimeGrid(2.0, 100), choose_gamma(p, c), c);
        FAIL() << "expected a DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("eta"), std::string::npos);
    }
}

TEST(Iterate, ReportsNonConvergence) {
    const auto p = reference();
    const double c = ring_lsi(16);
    IterateOptions opt;
    opt.max_n = 2;
    opt.tol = 1e-300;
    EXPECT_THROW(iterate(p, TimeGrid(0.125, 50), choose_gamma(p, c), c, opt), ConvergenceError);
}

TEST(Iterate, ContractsAtPredictedRate) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const TimeGrid grid(auto_select_T(p, g, c), 125);
    const auto sol = iterate(p, grid, g, c);
    for (double r : sol.report.ratios) EXPECT_LE(r, sol.report.eta_predicted * 1.05);
    EXPECT_NEAR(sol.report.eta_limit, 2 * p.lambda * c / g, 1e-15);
    EXPECT_NEAR(sol.report.eta_limit_text, 2 * sol.report.eta_limit, 1e-15);
}

TEST(Iterate, UniquenessAcrossStoppingRules) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const TimeGrid grid(0.125, 125);
    IterateOptions loose;
    loose.tol = 1e-14;
    const auto a = iterate(p, grid, g, c, loose);
    IterateOptions tight;
    tight.max_n = 80;
    tight.tol = 1e-26;
    const auto b = iterate(p, grid, g, c, tight);
    EXPECT_GT(b.report.n_converged, a.report.n_converged);
    // tol bounds Sigma, a squared quantity; compare in concentration units
    EXPECT_LE(gap(a.u, b.u), 10 * std::sqrt(loose.tol));
}

TEST(Iterate, PositivityConservationMomentsProperty) {
    for (std::uint64_t seed = 100; seed < 106; ++seed) {
        std::mt19937_64 rng(seed);
        const double lambda = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
        auto p = random_problem(seed, lambda, 2.0, 12, 1.0, 1.5);
        p.f[seed % 4](static_cast<Eigen::Index>(seed % 12)) = 0.0;
        const double c = ring_lsi(12);
        const double g = choose_gamma(p, c);
        const TimeGrid grid(auto_select_T(p, g, c), 100);
        IterateOptions opt;
        opt.keep_iterates = true;
        const auto sol = iterate(p, grid, g, c, opt);
        EXPECT_GE(sol.report.positivity_min, -1e-10);
        EXPECT_LE(sol.report.conservation_residual, 1e-9);
        EXPECT_GE(sol.report.moment_slack, -1e-8);
        EXPECT_LE(sol.report.uniform_bound_ratio, 1 + 1e-6);
        for (const auto& it : sol.iterates) {
            EXPECT_LE(conservation_residual(it, p), 1e-9);
            for (const auto& ui : it) EXPECT_GE(ui.min(), -1e-10);
        }
        // direct moment check at the last node
        const auto& sp = p.gen.space();
        const int k = grid.steps();
        for (double alpha : {1.0, 2.0})
            for (double gam : {0.5, 1.0, 2.0}) {
                const double bound = std::max(exp_moment(sp, p.f[0] + p.f[2], gam, alpha).value,
                                              exp_moment(sp, p.f[1] + p.f[3], gam, alpha).value);
                for (int i = 0; i < 4; ++i)
                    EXPECT_LE(exp_moment(sp, sol.u[i].slice(k), gam, alpha).value, bound + 1e-8 * (1 + bound));
            }
    }
}

TEST(SigmaN, ZeroForIdenticalIterates) {
    const auto p = reference();
    const TimeGrid grid(0.1, 10);
    const auto u = heat_flows(p, grid);
    for (double s : sigma_n(u, u, p.gen, 0.7)) EXPECT_EQ(s, 0.0);
}

TEST(SigmaN, ConstantShiftOnOneSlice) {
    const auto p = reference();
    const TimeGrid grid(0.1, 4);
    const auto u = heat_flows(p, grid);
    auto v = u;
    const double c = 0.37;
    v[1].set_slice(2, u[1].slice(2).array() + c);
    const auto s = sigma_n(v, u, p.gen, 0.0);
    EXPECT_NEAR(s[2], c * c, 1e-15);
    EXPECT_EQ(s[1], 0.0);
}

TEST(EtaT, LimitsAndNoReaction) {
    EXPECT_NEAR(eta_T(0.3, 10.0, 50.0, 2.0, 1e-14), 2 * 0.3 * 2.0 / 10.0, 1e-12);
    EXPECT_EQ(eta_T(0.0, 10.0, 50.0, 2.0, 1.0), 0.0);
    EXPECT_NEAR(eta_T(0.3, 10.0, 50.0, 2.0, 0.5),
                (0.6 / 10.0) * std::exp(4 * 0.3 * 50 * 0.5 / 10.0) * (50 * 0.5 + 2.0), 1e-12);
}

TEST(ConstantD, MatchesDirectMoments) {
    const auto p = reference();
    const auto& sp = p.gen.space();
    const double g = 3.0;
    const double direct = std::max(std::log(exp_moment(sp, p.f[0] + p.f[2], g, 1.0).value),
                                   std::log(exp_moment(sp, p.f[1] + p.f[3], g, 1.0).value));
    EXPECT_NEAR(constant_D(p, g), direct, 1e-12);
}

TEST(AutoSelectT, DyadicAndFeasible) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const double T = auto_select_T(p, g, c);
    EXPECT_EQ(T, std::exp2(std::round(std::log2(T))));
    EXPECT_LE(eta_T(p.lambda, g, constant_D(p, g), c, T), 0.9);
    EXPECT_GT(eta_T(p.lambda, g, constant_D(p, g), c, 2 * T), 0.9);
}

TEST(ConservationResidual, ExactCases) {
    const auto p = reference();
    const TimeGrid grid(0.5, 20);
    EXPECT_LE(conservation_residual(heat_flows(p, grid), p), 1e-12);
    const auto e = equilibrium();
    EXPECT_LE(conservation_residual(heat_flows(e, grid), e), 1e-12);
}

TEST(ChainIntervals, EquilibriumStaysConstant) {
    const auto p = equilibrium();
    const double c = ring_lsi(8);
    const double g = choose_gamma(p, c);
    const double T = auto_select_T(p, g, c);
    const auto ch = chain_intervals(p, T, 2, 20, g, c);
    for (const auto& ui : ch.u) EXPECT_LT((ui.values().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_EQ(ch.u.front().grid().steps(), 40);
}

TEST(ChainIntervals, SingleIntervalIsIterate) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const auto ch = chain_intervals(p, 0.125, 1, 125, g, c);
    const auto sol = iterate(p, TimeGrid(0.125, 125), g, c);
    EXPECT_EQ(gap(ch.u, sol.u), 0.0);
}

TEST(ChainIntervals, FourQuartersMatchOracle) {
    const auto p = random_problem(5, 0.1, 1.0);
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    const auto ch = chain_intervals(p, 0.25, 4, 250, g, c);
    EXPECT_LE(gap(ch.u, oracle(p, TimeGrid(1.0, 1000))), 5e-5);
    for (double s : ch.seam_moment_slack) EXPECT_GE(s, -1e-8);
}

TEST(ChainIntervals, NamesTheFailingInterval) {
    const auto p = reference();
    const double c = ring_lsi(16);
    try {
        chain_intervals(p, 1.0, 3, 50, choose_gamma(p, c), c);
        FAIL() << "expected a DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("interval 1"), std::string::npos);
    }
}

TEST(WeakResidualRdp, EquilibriumConstantTests) {
    const auto p = equilibrium();
    const TimeGrid grid(0.5, 20);
    const PolynomialTest t{{1.0}, StateFunction::Ones(8)};
    EXPECT_LE(weak_residual_rdp(heat_flows(p, grid), p, {t, t, t, t}), 1e-10);
    const PolynomialTest w{{1.0, -0.4}, (Eigen::VectorXd(8) << 1, 2, 0, -1, 3, 0.5, 0, 1).finished()};
    EXPECT_LE(weak_residual_rdp(heat_flows(p, grid), p, {w, w, w, w}), 1e-10);
}

TEST(WeakResidualRdp, NoReactionReducesToLinearChecks) {
    const auto p = random_problem(6, 0.0, 2.0);
    rdkin::testing::Gen g(6);
    std::array<PolynomialTest, 4> tests;
    for (auto& t : tests) t = {{1.0, 0.5, -0.3}, g.gaussian(16, 1.0)};
    double prev = 0.0;
    for (int steps : {25, 50, 100}) {
        const TimeGrid grid(1.0, steps);
        const auto u = heat_flows(p, grid);
        const double r = weak_residual_rdp(u, p, tests);
        // each component alone behaves like the linear residual
        for (int i = 0; i < 4; ++i) {
            const double lin = weak_residual(p.species_generator(i), u[i], Field(grid, 16), Field(grid, 16), tests[i]);
            EXPECT_LT(lin, 1e-3);
        }
        if (prev > 0) EXPECT_NEAR(prev / r, 4.0, 0.3);
        prev = r;
    }
}

TEST(WeakResidualRdp, SecondOrderOnReference) {
    const auto p = reference();
    const double c = ring_lsi(16);
    const double g = choose_gamma(p, c);
    std::array<PolynomialTest, 4> tests;
    for (int i = 0; i < 4; ++i) {
        tests[i].coeffs = {1.0, 0.5, -0.3};
        tests[i].psi.resize(16);
        for (int x = 0; x < 16; ++x) tests[i].psi(x) = std::sin(0.4 * x + i);
    }
    double prev = 0.0;
    for (int steps : {16, 32, 64, 128}) {
        const auto sol = iterate(p, TimeGrid(0.125, steps), g, c);
        const double r = weak_residual_rdp(sol.u, p, tests);
        if (prev > 0) {
            const double order = std::log2(prev / r);
            EXPECT_GE(order, 1.8);
            EXPECT_LE(order, 2.2);
        }
        prev = r;
    }
}
