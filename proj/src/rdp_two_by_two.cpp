#include "rdkin/rdp_two_by_two.hpp"

#include "rdkin/errors.hpp"
#include "rdkin/orlicz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace rdkin {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

constexpr double kSigmaFloor = 1e-24;

Field semigroup_field(const Generator& gen, const StateFunction& f, const TimeGrid& grid) {
    Field out(grid, gen.size());
    for (int k = 0; k <= grid.steps(); ++k) {
        out.set_slice(k, semigroup_apply(gen, grid.time(k), f));
    }
    return out;
}

double min_over(const Species& u) {
    double m = std::numeric_limits<double>::infinity();
    for (const Field& f : u) {
        m = std::min(m, f.min());
    }
    return m;
}

}  // namespace

void TwoByTwoProblem::validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) {
        throw DomainError("diffusion coefficients C1, C2 must be positive");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DomainError("reaction rate must be nonnegative");
    }
    for (int i = 0; i < 4; ++i) {
        gen.space().check(f[i], "initial datum");
        if (f[i].minCoeff() < 0.0) {
            throw DomainError("initial datum f" + std::to_string(i + 1) + " has a negative entry");
        }
    }
}

double choose_gamma(const TwoByTwoProblem& problem, double c_ls) {
    if (!(c_ls > 0.0)) {
        throw DomainError("LSI constant must be positive");
    }
    if (problem.lambda == 0.0) {
        return 1.0;  // no reaction: any gamma works
    }
    return 2.0 * 4.0 * problem.lambda * c_ls / problem.min_c();
}

Species heat_flows(const TwoByTwoProblem& problem, const TimeGrid& grid) {
    Species out;
    for (int i = 0; i < 4; ++i) {
        out.push_back(semigroup_field(problem.species_generator(i), problem.f[i], grid));
    }
    return out;
}

std::array<Field, 2> paired_sums(const TwoByTwoProblem& problem, const TimeGrid& grid) {
    return {semigroup_field(problem.species_generator(0), problem.f[0] + problem.f[2], grid),
            semigroup_field(problem.species_generator(1), problem.f[1] + problem.f[3], grid)};
}

Species decoupled_step(const TwoByTwoProblem& problem, const Species& u_prev,
                       const TimeGrid& grid) {
    if (u_prev.size() != 4) {
        throw StructuralError("two-by-two iterate needs four species");
    }
    const auto sums = paired_sums(problem, grid);
    const double lam = problem.lambda;
    // species i (0-based): own pair sums[i % 2], partner pair sums[1 - i % 2];
    // source partner: u1 <- u4, u3 <- u2, u2 <- u3, u4 <- u1
    constexpr int partner[4] = {3, 2, 1, 0};
    Species out;
    for (int i = 0; i < 4; ++i) {
        const Field& own = sums[i % 2];
        const Field& other = sums[1 - i % 2];
        Field a(grid, lam * other.values());
        Field b(grid, lam * own.values().cwiseProduct(u_prev[partner[i]].values()));
        CornerstoneProblem cs{problem.species_generator(i), std::move(a), std::move(b),
                              problem.f[i]};
        out.push_back(solve_cornerstone(cs, 1));
    }
    return out;
}

double constant_D(const TwoByTwoProblem& problem, double gamma, double alpha) {
    const FiniteMeasureSpace& space = problem.gen.space();
    return std::max(exp_moment(space, problem.f[0] + problem.f[2], gamma, alpha).log_value,
                    exp_moment(space, problem.f[1] + problem.f[3], gamma, alpha).log_value);
}

double eta_T(double lambda, double gamma, double D, double c_ls, double T) {
    if (!(gamma > 0.0)) {
        throw DomainError("eta_T needs gamma > 0");
    }
    return (2.0 * lambda / gamma) * std::exp(4.0 * lambda * D * T / gamma) * (D * T + c_ls);
}

double auto_select_T(const TwoByTwoProblem& problem, double gamma, double c_ls, double eta_max) {
    const double d = constant_D(problem, gamma);
    for (int k = 3; k >= -30; --k) {
        const double t = std::ldexp(1.0, k);
        if (eta_T(problem.lambda, gamma, d, c_ls, t) <= eta_max) {
            return t;
        }
    }
    throw DomainError("no horizon T >= 2^-30 gives eta(T) <= " + num(eta_max) +
                      "; eta(0) = " + num(eta_T(problem.lambda, gamma, d, c_ls, 0.0)));
}

std::vector<double> sigma_n(const Species& u_n, const Species& u_prev, const Generator& gen,
                            double kappa) {
    if (u_n.size() != u_prev.size() || u_n.empty()) {
        throw StructuralError("sigma_n needs matching species lists");
    }
    const TimeGrid& grid = u_n.front().grid();
    const int steps = grid.steps();
    std::vector<double> out(steps + 1, 0.0);
    double integral = 0.0;
    double prev_e = 0.0;
    for (int k = 0; k <= steps; ++k) {
        double ms = 0.0;
        double e = 0.0;
        for (std::size_t i = 0; i < u_n.size(); ++i) {
            const StateFunction d = u_n[i].slice(k) - u_prev[i].slice(k);
            ms += integrate(gen.space(), d.cwiseAbs2());
            e += dirichlet_form(gen, d);
        }
        if (k > 0) {
            integral += 0.5 * grid.dt() * (prev_e + e);
        }
        prev_e = e;
        out[k] = ms + 2.0 * kappa * integral;
    }
    return out;
}

double conservation_residual(const Species& u, const TwoByTwoProblem& problem) {
    if (u.size() != 4) {
        throw StructuralError("two-by-two conservation needs four species");
    }
    const auto sums = paired_sums(problem, u.front().grid());
    const double r13 = (u[0].values() + u[2].values() - sums[0].values()).cwiseAbs().maxCoeff();
    const double r24 = (u[1].values() + u[3].values() - sums[1].values()).cwiseAbs().maxCoeff();
    return std::max(r13, r24);
}

double moment_slack(const Species& u, const TwoByTwoProblem& problem) {
    const FiniteMeasureSpace& space = problem.gen.space();
    const StateFunction s13 = problem.f[0] + problem.f[2];
    const StateFunction s24 = problem.f[1] + problem.f[3];
    double worst = std::numeric_limits<double>::infinity();
    for (double alpha : {1.0, 2.0}) {
        for (double g : {0.5, 1.0, 2.0}) {
            const double bound = std::max(exp_moment(space, s13, g, alpha).value,
                                          exp_moment(space, s24, g, alpha).value);
            for (const Field& field : u) {
                for (int k = 0; k <= field.grid().steps(); ++k) {
                    const double slack =
                        moment_bound_check(space, field.slice(k), s13, s24, g, alpha);
                    worst = std::min(worst, slack / (1.0 + bound));
                }
            }
        }
    }
    return worst;
}

TwoByTwoSolution iterate(const TwoByTwoProblem& problem, const TimeGrid& grid, double gamma,
                         double c_ls, const IterateOptions& options) {
    problem.validate();
    if (!(gamma > 0.0) || !(c_ls > 0.0)) {
        throw DomainError("iterate needs gamma > 0 and C_LS > 0");
    }
    const FiniteMeasureSpace& space = problem.gen.space();
    TwoByTwoSolution sol;
    IterationReport& rep = sol.report;
    rep.gamma = gamma;
    rep.c_ls = c_ls;
    rep.t_end = grid.t_end();
    rep.D = constant_D(problem, gamma, 1.0);
    rep.D_alpha2 = constant_D(problem, gamma, 2.0);
    rep.kappa = problem.min_c() - 2.0 * problem.lambda * c_ls / gamma;
    rep.eta_limit = 2.0 * problem.lambda * c_ls / gamma;
    rep.eta_limit_text = 4.0 * problem.lambda * c_ls / gamma;
    rep.eta_predicted = eta_T(problem.lambda, gamma, rep.D, c_ls, grid.t_end());
    if (!(rep.eta_predicted < 1.0)) {
        throw DomainError("eta(T) = " + num(rep.eta_predicted) +
                          " >= 1 at T = " + num(grid.t_end()) +
                          "; the contraction check fails, choose a smaller T");
    }
    const auto sums = paired_sums(problem, grid);
    for (int k = 0; k <= grid.steps(); ++k) {
        for (const Field& s : sums) {
            rep.M_gamma = std::max(
                rep.M_gamma, exp_moment(space, problem.lambda * s.slice(k), gamma, 1.0).value);
        }
    }

    double f_sq = 0.0;
    for (const StateFunction& fi : problem.f) {
        f_sq += integrate(space, fi.cwiseAbs2());
    }

    Species prev = heat_flows(problem, grid);
    rep.conservation_residual = conservation_residual(prev, problem);
    rep.positivity_min = min_over(prev);
    if (options.keep_iterates) {
        sol.iterates.push_back(prev);
    }
    if (f_sq == 0.0) {
        // zero datum: the heat flow is the solution
        sol.u = std::move(prev);
        rep.moment_slack = moment_slack(sol.u, problem);
        return sol;
    }

    for (int n = 1; n <= options.max_n; ++n) {
        Species next = decoupled_step(problem, prev, grid);
        const std::vector<double> sig = sigma_n(next, prev, problem.gen, rep.kappa);
        const double sup_sig = *std::max_element(sig.begin(), sig.end());
        double gap = 0.0;
        for (int i = 0; i < 4; ++i) {
            gap = std::max(gap, sup_distance(next[i], prev[i]));
        }
        for (int k = 0; k <= grid.steps(); ++k) {
            const double bound = std::exp(4.0 * problem.lambda * rep.D * grid.time(k) / gamma) * f_sq;
            rep.uniform_bound_ratio = std::max(rep.uniform_bound_ratio, sig[k] / bound);
        }
        if (!rep.sigma.empty()) {
            const double last = rep.sigma.back();
            const double ratio = (last > kSigmaFloor && sup_sig > kSigmaFloor) ? sup_sig / last : 0.0;
            rep.ratios.push_back(ratio);
            if (n >= 3) {
                // ratios for n >= 2 certify the contraction
                rep.eta_measured = std::max(rep.eta_measured, ratio);
            }
        }
        rep.sigma.push_back(sup_sig);
        rep.sup_gaps.push_back(gap);
        rep.conservation_residual =
            std::max(rep.conservation_residual, conservation_residual(next, problem));
        rep.positivity_min = std::min(rep.positivity_min, min_over(next));
        if (options.keep_iterates) {
            sol.iterates.push_back(next);
        }
        prev = std::move(next);
        if (sup_sig < options.tol) {
            rep.n_converged = n;
            sol.u = std::move(prev);
            rep.moment_slack = moment_slack(sol.u, problem);
            return sol;
        }
    }
    throw ConvergenceError("two-by-two iteration did not converge in " +
                               std::to_string(options.max_n) + " steps",
                           rep.sigma.empty() ? 0.0 : rep.sigma.back());
}

ChainResult chain_intervals(const TwoByTwoProblem& problem, double T_step, int n_intervals,
                            int steps_per_interval, double gamma, double c_ls,
                            const IterateOptions& options) {
    if (n_intervals < 1) {
        throw DomainError("chain_intervals needs at least one interval");
    }
    const TimeGrid sub(T_step, steps_per_interval);
    const TimeGrid whole(T_step * n_intervals, steps_per_interval * n_intervals);
    ChainResult out;
    for (int i = 0; i < 4; ++i) {
        out.u.emplace_back(whole, problem.gen.size());
    }
    const FiniteMeasureSpace& space = problem.gen.space();
    TwoByTwoProblem current = problem;
    for (int j = 0; j < n_intervals; ++j) {
        TwoByTwoSolution sol;
        try {
            sol = iterate(current, sub, gamma, c_ls, options);
        } catch (const DomainError& e) {
            throw DomainError("interval " + std::to_string(j + 1) + " of " +
                              std::to_string(n_intervals) + ": " + e.what());
        }
        for (int i = 0; i < 4; ++i) {
            const int offset = j * steps_per_interval;
            out.u[i].values().middleCols(offset, steps_per_interval + 1) = sol.u[i].values();
        }
        out.reports.push_back(sol.report);
        TwoByTwoProblem next = current;
        for (int i = 0; i < 4; ++i) {
            // clip round-off negatives so the restart datum is admissible
            next.f[i] = sol.u[i].slice(steps_per_interval).cwiseMax(0.0);
        }
        if (j + 1 < n_intervals) {
            double worst = std::numeric_limits<double>::infinity();
            for (double alpha : {1.0, 2.0}) {
                for (double g : {0.5, 1.0, 2.0}) {
                    for (int pair = 0; pair < 2; ++pair) {
                        const double before =
                            exp_moment(space, problem.f[pair] + problem.f[pair + 2], g, alpha).value;
                        const double after =
                            exp_moment(space, next.f[pair] + next.f[pair + 2], g, alpha).value;
                        worst = std::min(worst, (before - after) / (1.0 + before));
                    }
                }
            }
            out.seam_moment_slack.push_back(worst);
        }
        current = std::move(next);
    }
    return out;
}

double weak_residual_rdp(const Species& u, const TwoByTwoProblem& problem,
                         const std::array<PolynomialTest, 4>& tests) {
    if (u.size() != 4) {
        throw StructuralError("two-by-two weak residual needs four species");
    }
    const FiniteMeasureSpace& space = problem.gen.space();
    const TimeGrid& grid = u.front().grid();
    const int steps = grid.steps();
    double defect_sq = 0.0;
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) {
        const PolynomialTest& test = tests[i];
        space.check(test.psi, "test function");
        const Generator gi = problem.species_generator(i);
        const double sign = i < 2 ? -1.0 : 1.0;
        const double lhs_end = test.p(grid.t_end()) * integrate(space, u[i].slice(steps).cwiseProduct(test.psi));
        const double lhs_start = test.p(0.0) * integrate(space, u[i].slice(0).cwiseProduct(test.psi));
        double time_term = 0.0;
        double energy_term = 0.0;
        double reaction_term = 0.0;
        double size = 0.0;
        const double psi_norm = std::sqrt(integrate(space, test.psi.cwiseProduct(test.psi)));
        for (int k = 0; k <= steps; ++k) {
            const double w = (k == 0 || k == steps ? 0.5 : 1.0) * grid.dt();
            const double t = grid.time(k);
            const StateFunction ui = u[i].slice(k);
            const StateFunction g = u[0].slice(k).cwiseProduct(u[1].slice(k)) -
                                    u[2].slice(k).cwiseProduct(u[3].slice(k));
            time_term += w * test.dp(t) * integrate(space, ui.cwiseProduct(test.psi));
            energy_term += w * test.p(t) * dirichlet_form(gi, ui, test.psi);
            reaction_term += w * test.p(t) * sign * problem.lambda * integrate(space, g.cwiseProduct(test.psi));
            size = std::max(size, std::abs(test.p(t)) * psi_norm *
                                      std::sqrt(integrate(space, ui.cwiseProduct(ui))));
        }
        const double d = (lhs_end - lhs_start) - (time_term - energy_term + reaction_term);
        defect_sq += d * d;
        scale += std::abs(lhs_end) + std::abs(lhs_start) + std::abs(time_term) +
                 std::abs(energy_term) + std::abs(reaction_term) + size;
    }
    return scale > 0.0 ? std::sqrt(defect_sq) / scale : 0.0;
}

}  // namespace rdkin
