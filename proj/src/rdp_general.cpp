#include "rdkin/rdp_general.hpp"

#include "rdkin/errors.hpp"
#include "rdkin/orlicz.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace rdkin {

namespace {

constexpr double kSigmaFloor = 1e-24;

// prod_j u_j^{e_j} pointwise with 0^0 = 1
StateFunction monomial(const Species& u, int k, const std::vector<int>& e) {
    StateFunction out = StateFunction::Ones(static_cast<Eigen::Index>(u.front().states()));
    for (std::size_t j = 0; j < e.size(); ++j) {
        if (e[j] == 0) {
            continue;
        }
        const auto col = u[j].values().col(k);
        for (Eigen::Index x = 0; x < out.size(); ++x) {
            double v = 1.0;
            for (int p = 0; p < e[j]; ++p) v *= col(x);
            out(x) *= v;
        }
    }
    return out;
}

std::vector<int> minus_unit(std::vector<int> e, int i) {
    e[static_cast<std::size_t>(i)] -= 1;
    return e;
}

}  // namespace

void ReactionSpec::validate() const {
    const std::size_t n = alpha.size();
    if (n < 2) {
        throw SpecificationError("a reaction needs at least two species");
    }
    if (beta.size() != n || lambda.size() != n || block.size() != n) {
        throw SpecificationError("alpha, beta, lambda and block must have one entry per species");
    }
    if (generators.empty()) {
        throw SpecificationError("at least one block generator is required");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] < 0 || beta[i] < 0) {
            throw SpecificationError("stoichiometric coefficients must be nonnegative");
        }
        if (alpha[i] == beta[i]) {
            throw SpecificationError("species " + std::to_string(i + 1) +
                                     " is a catalyst (alpha = beta); not supported");
        }
        if (!(lambda[i] > 0.0)) {
            throw SpecificationError("reaction rates must be positive");
        }
        if (block[i] < 0 || static_cast<std::size_t>(block[i]) >= generators.size()) {
            throw SpecificationError("species " + std::to_string(i + 1) +
                                     " refers to a missing block");
        }
    }
    for (std::size_t k = 0; k < generators.size(); ++k) {
        if (!(generators[k].space() == generators.front().space())) {
            throw SpecificationError("all blocks must share one measure space");
        }
        bool has_minus = false;
        bool has_plus = false;
        bool used = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<std::size_t>(block[i]) != k) continue;
            used = true;
            (beta[i] < alpha[i] ? has_minus : has_plus) = true;
        }
        if (used && (!has_minus || !has_plus)) {
            throw SpecificationError("block " + std::to_string(k) +
                                     " needs both a consumed and a produced species");
        }
    }
}

double ReactionSpec::delta(std::size_t i) const {
    return lambda[i] * std::abs(beta[i] - alpha[i]);
}

int ReactionSpec::theta() const {
    return std::max(std::accumulate(alpha.begin(), alpha.end(), 0),
                    std::accumulate(beta.begin(), beta.end(), 0)) -
           1;
}

NuMapping build_nu_mapping(const ReactionSpec& spec) {
    spec.validate();
    NuMapping out;
    for (std::size_t k = 0; k < spec.generators.size(); ++k) {
        std::vector<int> minus;
        std::vector<int> plus;
        for (std::size_t i = 0; i < spec.q(); ++i) {
            if (static_cast<std::size_t>(spec.block[i]) != k) continue;
            (spec.beta[i] < spec.alpha[i] ? minus : plus).push_back(static_cast<int>(i));
        }
        if (minus.empty()) {
            out.sources.emplace_back();
            out.images.emplace_back();
            continue;
        }
        const bool swapped = minus.size() < plus.size();
        const std::vector<int>& src = swapped ? plus : minus;
        const std::vector<int>& dst = swapped ? minus : plus;
        std::vector<int> image(src.size());
        for (std::size_t l = 0; l < src.size(); ++l) {
            image[l] = dst[l % dst.size()];
        }
        for (int target : dst) {
            SubBlock sb;
            sb.block = static_cast<int>(k);
            sb.target = target;
            sb.swapped = swapped;
            for (std::size_t l = 0; l < src.size(); ++l) {
                if (image[l] == target) {
                    sb.consumers.push_back(src[l]);
                    sb.Z += spec.delta(static_cast<std::size_t>(src[l]));
                }
            }
            out.sub_blocks.push_back(std::move(sb));
        }
        out.sources.push_back(src);
        out.images.push_back(std::move(image));
    }
    return out;
}

MatrixField::MatrixField(TimeGrid grid, int m, std::size_t states) : m_(m) {
    if (m < 1) {
        throw StructuralError("matrix field needs dimension >= 1");
    }
    entries_.assign(static_cast<std::size_t>(m * m), Field(grid, states));
}

Eigen::MatrixXd MatrixField::at(int k, Eigen::Index x) const {
    Eigen::MatrixXd out(m_, m_);
    for (int a = 0; a < m_; ++a) {
        for (int b = 0; b < m_; ++b) {
            out(a, b) = entry(a, b).values()(x, k);
        }
    }
    return out;
}

std::vector<Field> solve_matrix_cornerstone(const Generator& gen, const MatrixField& a,
                                            const std::vector<Field>& b,
                                            const std::vector<StateFunction>& f, int substeps,
                                            bool plus_variant) {
    const int m = a.dim();
    if (static_cast<int>(b.size()) != m || static_cast<int>(f.size()) != m) {
        throw StructuralError("matrix cornerstone: A, B and f dimensions disagree");
    }
    if (substeps < 1) {
        throw DomainError("substeps must be >= 1");
    }
    const TimeGrid& grid = a.grid();
    const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
    for (int c = 0; c < m; ++c) {
        gen.space().check(f[c], "initial datum");
        if (!(b[c].grid() == grid) || b[c].states() != gen.size()) {
            throw StructuralError("matrix cornerstone: B must live on A's grid and space");
        }
    }
    const double h = grid.dt() / substeps;
    const Eigen::MatrixXd ph = gen.semigroup_matrix(h);

    // state as n x m, one column per component
    Eigen::MatrixXd u(n, m);
    for (int c = 0; c < m; ++c) u.col(c) = f[c];

    std::vector<Field> out;
    for (int c = 0; c < m; ++c) {
        out.emplace_back(grid, gen.size());
        out.back().set_slice(0, f[c]);
    }

    // exact flow over h/2 of y' = M y + beta, per state, coefficients at fine node `fine`
    using Flow = std::vector<Eigen::MatrixXd>;
    auto make_flow = [&](int fine) {
        const int k = std::min(fine / substeps, grid.steps() - 1);
        const double w = static_cast<double>(fine - k * substeps) / substeps;
        Flow flow(static_cast<std::size_t>(n));
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(m + 1, m + 1);
        for (Eigen::Index x = 0; x < n; ++x) {
            Eigen::MatrixXd mat = a.at(k, x);
            if (w > 0.0) mat = (1.0 - w) * mat + w * a.at(k + 1, x);
            aug.topLeftCorner(m, m) = mat;
            for (int c = 0; c < m; ++c) {
                const double b0 = b[c].values()(x, k);
                aug(c, m) = w > 0.0 ? (1.0 - w) * b0 + w * b[c].values()(x, k + 1) : b0;
            }
            flow[static_cast<std::size_t>(x)] = (0.5 * h * aug).exp();
        }
        return flow;
    };
    auto apply_flow = [&](const Flow& flow) {
        for (Eigen::Index x = 0; x < n; ++x) {
            const Eigen::MatrixXd& e = flow[static_cast<std::size_t>(x)];
            Eigen::VectorXd y = u.row(x).transpose();
            if (plus_variant) {
                const Eigen::VectorXd pos = y.cwiseMax(0.0);
                y = e.topLeftCorner(m, m) * pos + e.topRightCorner(m, 1) + (y - pos);
            } else {
                y = e.topLeftCorner(m, m) * y + e.topRightCorner(m, 1);
            }
            u.row(x) = y.transpose();
        }
    };

    Flow left = make_flow(0);
    const int total = grid.steps() * substeps;
    for (int s = 0; s < total; ++s) {
        Flow right = make_flow(s + 1);
        apply_flow(left);
        u = ph * u;
        apply_flow(right);
        left = std::move(right);
        if ((s + 1) % substeps == 0) {
            const int k = (s + 1) / substeps;
            for (int c = 0; c < m; ++c) out[c].set_slice(k, u.col(c));
        }
    }
    return out;
}

void GeneralProblem::validate() const {
    spec.validate();
    if (f.size() != spec.q()) {
        throw StructuralError("one initial datum per species is required");
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        spec.generators.front().space().check(f[i], "initial datum");
        if (f[i].minCoeff() < 0.0) {
            throw DomainError("initial datum f" + std::to_string(i + 1) + " has a negative entry");
        }
    }
}

Species general_heat_flows(const GeneralProblem& problem, const TimeGrid& grid) {
    Species out;
    for (std::size_t i = 0; i < problem.spec.q(); ++i) {
        const Generator& g = problem.species_generator(i);
        Field fld(grid, g.size());
        for (int k = 0; k <= grid.steps(); ++k) {
            fld.set_slice(k, semigroup_apply(g, grid.time(k), problem.f[i]));
        }
        out.push_back(std::move(fld));
    }
    return out;
}

Species general_decoupled_step(const GeneralProblem& problem, const NuMapping& nu,
                               const Species& u_prev, const TimeGrid& grid) {
    const ReactionSpec& spec = problem.spec;
    if (u_prev.size() != spec.q()) {
        throw StructuralError("previous iterate has the wrong number of species");
    }
    const std::size_t states = problem.f.front().size();
    Species out(spec.q(), Field(grid, states));
    for (const SubBlock& sb : nu.sub_blocks) {
        const std::vector<int>& consume = sb.swapped ? spec.beta : spec.alpha;
        const std::vector<int>& produce = sb.swapped ? spec.alpha : spec.beta;
        const int m = static_cast<int>(sb.consumers.size()) + 1;
        const int last = m - 1;
        const double delta_i = spec.delta(static_cast<std::size_t>(sb.target));
        MatrixField a(grid, m, states);
        const std::vector<int> p_i = minus_unit(produce, sb.target);
        for (int k = 0; k <= grid.steps(); ++k) {
            const StateFunction y = monomial(u_prev, k, p_i);
            a.entry(last, last).values().col(k) = -delta_i * y;
            for (int r = 0; r < last; ++r) {
                const int species = sb.consumers[static_cast<std::size_t>(r)];
                const double delta_r = spec.delta(static_cast<std::size_t>(species));
                const StateFunction x = monomial(u_prev, k, minus_unit(consume, species));
                a.entry(r, r).values().col(k) = -delta_r * x;
                a.entry(r, last).values().col(k) = delta_r * y;
                a.entry(last, r).values().col(k) = (delta_i / sb.Z) * delta_r * x;
            }
        }
        std::vector<Field> b(static_cast<std::size_t>(m), Field(grid, states));
        std::vector<StateFunction> f;
        for (int species : sb.consumers) f.push_back(problem.f[static_cast<std::size_t>(species)]);
        f.push_back(problem.f[static_cast<std::size_t>(sb.target)]);
        const Generator& gen = spec.generators[static_cast<std::size_t>(sb.block)];
        std::vector<Field> sol = solve_matrix_cornerstone(gen, a, b, f, 1, false);
        for (int r = 0; r < last; ++r) {
            out[static_cast<std::size_t>(sb.consumers[static_cast<std::size_t>(r)])] =
                std::move(sol[static_cast<std::size_t>(r)]);
        }
        out[static_cast<std::size_t>(sb.target)] = std::move(sol[static_cast<std::size_t>(last)]);
    }
    return out;
}

double general_conservation_residual(const Species& u, const GeneralProblem& problem,
                                     const NuMapping& nu) {
    const ReactionSpec& spec = problem.spec;
    double worst = 0.0;
    for (const SubBlock& sb : nu.sub_blocks) {
        const double w = sb.Z / spec.delta(static_cast<std::size_t>(sb.target));
        const std::size_t target = static_cast<std::size_t>(sb.target);
        StateFunction f0 = w * problem.f[target];
        for (int r : sb.consumers) f0 += problem.f[static_cast<std::size_t>(r)];
        const Generator& gen = spec.generators[static_cast<std::size_t>(sb.block)];
        const TimeGrid& grid = u[target].grid();
        for (int k = 0; k <= grid.steps(); ++k) {
            StateFunction sum = w * u[target].slice(k);
            for (int r : sb.consumers) sum += u[static_cast<std::size_t>(r)].slice(k);
            const StateFunction exact = semigroup_apply(gen, grid.time(k), f0);
            worst = std::max(worst, (sum - exact).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

GeneralSolution general_iterate(const GeneralProblem& problem, const TimeGrid& grid,
                                const std::vector<double>& block_c_ls,
                                const IterateOptions& options) {
    problem.validate();
    const ReactionSpec& spec = problem.spec;
    if (block_c_ls.size() != spec.generators.size()) {
        throw StructuralError("one LSI constant per block is required");
    }
    const NuMapping nu = build_nu_mapping(spec);
    GeneralSolution sol;
    GeneralReport& rep = sol.report;
    rep.theta = spec.theta();
    rep.c_max = *std::max_element(block_c_ls.begin(), block_c_ls.end());
    double delta_max = 0.0;
    for (std::size_t i = 0; i < spec.q(); ++i) delta_max = std::max(delta_max, spec.delta(i));
    rep.gamma = 8.0 * delta_max * rep.c_max;
    rep.kappa = 1.0 - 2.0 * delta_max * rep.c_max / rep.gamma;

    auto sigma = [&](const Species& a, const Species& b) {
        double integral = 0.0;
        double prev_e = 0.0;
        double sup = 0.0;
        for (int k = 0; k <= grid.steps(); ++k) {
            double ms = 0.0;
            double e = 0.0;
            for (std::size_t i = 0; i < spec.q(); ++i) {
                const StateFunction d = a[i].slice(k) - b[i].slice(k);
                const Generator& g = problem.species_generator(i);
                ms += integrate(g.space(), d.cwiseAbs2());
                e += dirichlet_form(g, d);
            }
            if (k > 0) integral += 0.5 * grid.dt() * (prev_e + e);
            prev_e = e;
            sup = std::max(sup, ms + 2.0 * rep.kappa * integral);
        }
        return sup;
    };
    auto min_of = [](const Species& s) {
        double m = std::numeric_limits<double>::infinity();
        for (const Field& fld : s) m = std::min(m, fld.min());
        return m;
    };

    Species prev = general_heat_flows(problem, grid);
    rep.positivity_min = min_of(prev);
    for (int n = 1; n <= options.max_n; ++n) {
        Species next = general_decoupled_step(problem, nu, prev, grid);
        const double s = sigma(next, prev);
        double gap = 0.0;
        for (std::size_t i = 0; i < spec.q(); ++i) gap = std::max(gap, sup_distance(next[i], prev[i]));
        if (!rep.sigma.empty()) {
            const double last = rep.sigma.back();
            const double ratio = (last > kSigmaFloor && s > kSigmaFloor) ? s / last : 0.0;
            rep.ratios.push_back(ratio);
            if (n >= 3) rep.eta_measured = std::max(rep.eta_measured, ratio);
        }
        rep.sigma.push_back(s);
        rep.sup_gaps.push_back(gap);
        rep.conservation_residual =
            std::max(rep.conservation_residual, general_conservation_residual(next, problem, nu));
        rep.positivity_min = std::min(rep.positivity_min, min_of(next));
        prev = std::move(next);
        if (s < options.tol) {
            rep.n_converged = n;
            sol.u = std::move(prev);
            return sol;
        }
    }
    throw ConvergenceError("general iteration did not converge in " +
                               std::to_string(options.max_n) + " steps",
                           rep.sigma.empty() ? 0.0 : rep.sigma.back());
}

bool MembershipTable::products_ok(double rel) const {
    for (std::size_t i = 0; i < product_norm.size(); ++i) {
        if (product_norm[i] > product_bound[i] * (1.0 + rel)) return false;
    }
    return true;
}

MembershipTable theta_and_membership(const ReactionSpec& spec,
                                     const std::vector<StateFunction>& f) {
    if (f.size() != spec.q()) {
        throw StructuralError("one function per species is required");
    }
    const FiniteMeasureSpace& space = spec.generators.front().space();
    MembershipTable table;
    table.theta = spec.theta();
    table.gammas = {0.25, 0.5, 1.0};
    const double power = 2.0 * std::max(1, table.theta);
    for (const StateFunction& fi : f) {
        if (fi.minCoeff() < 0.0) {
            throw DomainError("membership table expects nonnegative data");
        }
        std::vector<double> row;
        for (double g : table.gammas) row.push_back(exp_moment(space, fi, g, power).value);
        table.moments.push_back(std::move(row));
    }
    const YoungExp phi2(2.0);
    for (const std::vector<int>* coeffs : {&spec.alpha, &spec.beta}) {
        for (std::size_t i = 0; i < spec.q(); ++i) {
            if ((*coeffs)[i] < 1) continue;
            const std::vector<int> e = minus_unit(*coeffs, static_cast<int>(i));
            const int m = std::accumulate(e.begin(), e.end(), 0);
            if (m < 1) continue;
            StateFunction prod = StateFunction::Ones(f.front().size());
            double bound = 1.0;
            const YoungExp phi_m(2.0 * m);
            for (std::size_t j = 0; j < e.size(); ++j) {
                if (e[j] == 0) continue;
                prod = prod.cwiseProduct(f[j].array().pow(e[j]).matrix());
                bound *= std::pow(gauge_norm(space, f[j], phi_m), e[j]);
            }
            table.product_norm.push_back(gauge_norm(space, prod, phi2));
            table.product_bound.push_back(bound);
        }
    }
    return table;
}

GeneralProblem embed_two_by_two(const TwoByTwoProblem& problem) {
    ReactionSpec spec{{1, 1, 0, 0},
                      {0, 0, 1, 1},
                      std::vector<double>(4, problem.lambda),
                      {0, 1, 0, 1},
                      {problem.gen.scaled(problem.c1), problem.gen.scaled(problem.c2)}};
    return GeneralProblem{std::move(spec), {problem.f[0], problem.f[1], problem.f[2], problem.f[3]}};
}

}  // namespace rdkin
