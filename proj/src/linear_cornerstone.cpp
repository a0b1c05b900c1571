#include "rdkin/linear_cornerstone.hpp"

#include "rdkin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rdkin {

TimeGrid::TimeGrid(double t_end, int steps) : t_end_(t_end), steps_(steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw DomainError("time grid needs t_end > 0");
    }
    if (steps < 1) {
        throw DomainError("time grid needs at least one step");
    }
}

TimeGrid TimeGrid::refined(int factor) const {
    if (factor < 1) {
        throw DomainError("refinement factor must be >= 1");
    }
    return TimeGrid(t_end_, steps_ * factor);
}

bool TimeGrid::operator==(const TimeGrid& other) const {
    return steps_ == other.steps_ && std::abs(t_end_ - other.t_end_) <= 1e-14 * t_end_;
}

Field::Field(TimeGrid grid, std::size_t states)
    : grid_(grid),
      values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states), grid.steps() + 1)) {}

Field::Field(TimeGrid grid, Eigen::MatrixXd values) : grid_(grid), values_(std::move(values)) {
    if (values_.cols() != grid_.steps() + 1) {
        throw StructuralError("field has " + std::to_string(values_.cols()) +
                              " time slices, grid has " + std::to_string(grid_.steps() + 1));
    }
}

Field Field::constant(const TimeGrid& grid, const StateFunction& f) {
    Field out(grid, static_cast<std::size_t>(f.size()));
    out.values_.colwise() = f;
    return out;
}

Field Field::from_function(const TimeGrid& grid, std::size_t states,
                           const std::function<StateFunction(double)>& fn) {
    Field out(grid, states);
    for (int k = 0; k <= grid.steps(); ++k) {
        out.set_slice(k, fn(grid.time(k)));
    }
    return out;
}

void Field::set_slice(int k, const StateFunction& f) {
    if (f.size() != values_.rows()) {
        throw StructuralError("slice length does not match the field");
    }
    values_.col(k) = f;
}

StateFunction Field::at(double t) const {
    if (t <= 0.0) {
        return values_.col(0);
    }
    if (t >= grid_.t_end()) {
        return values_.col(grid_.steps());
    }
    const double pos = t / grid_.dt();
    int k = static_cast<int>(std::floor(pos));
    k = std::clamp(k, 0, grid_.steps() - 1);
    const double w = pos - k;
    if (w == 0.0) {
        return values_.col(k);
    }
    return (1.0 - w) * values_.col(k) + w * values_.col(k + 1);
}

double sup_distance(const Field& a, const Field& b) {
    if (!(a.grid() == b.grid()) || a.states() != b.states()) {
        throw StructuralError("fields live on different grids or spaces");
    }
    return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

void CornerstoneProblem::validate() const {
    gen.space().check(f, "initial datum");
    if (!(a.grid() == b.grid())) {
        throw StructuralError("A and B must share a time grid");
    }
    if (a.states() != gen.size() || b.states() != gen.size()) {
        throw StructuralError("A and B must live on the generator's space");
    }
}

StateFunction affine_flow(const StateFunction& u, const StateFunction& a, const StateFunction& b,
                          double h) {
    StateFunction out(u.size());
    for (Eigen::Index x = 0; x < u.size(); ++x) {
        const double ah = a(x) * h;
        // (1 - e^{-ah}) / a written as h * (-expm1(-ah) / ah), the latter -> 1 as ah -> 0
        const double g = std::abs(ah) < 1e-300 ? h : -std::expm1(-ah) / a(x);
        out(x) = std::exp(-ah) * u(x) + g * b(x);
    }
    return out;
}

Field solve_cornerstone(const CornerstoneProblem& problem, int substeps) {
    problem.validate();
    if (substeps < 1) {
        throw DomainError("substeps must be >= 1");
    }
    const TimeGrid& grid = problem.grid();
    const double h = grid.dt() / substeps;
    const Eigen::MatrixXd ph = problem.gen.semigroup_matrix(h);

    Field out(grid, problem.gen.size());
    out.set_slice(0, problem.f);
    StateFunction u = problem.f;
    for (int k = 0; k < grid.steps(); ++k) {
        const StateFunction a0 = problem.a.slice(k);
        const StateFunction a1 = problem.a.slice(k + 1);
        const StateFunction b0 = problem.b.slice(k);
        const StateFunction b1 = problem.b.slice(k + 1);
        for (int s = 0; s < substeps; ++s) {
            const double wl = static_cast<double>(s) / substeps;
            const double wr = static_cast<double>(s + 1) / substeps;
            u = affine_flow(u, (1.0 - wl) * a0 + wl * a1, (1.0 - wl) * b0 + wl * b1, 0.5 * h);
            u = ph * u;
            u = affine_flow(u, (1.0 - wr) * a0 + wr * a1, (1.0 - wr) * b0 + wr * b1, 0.5 * h);
        }
        out.set_slice(k + 1, u);
    }
    return out;
}

namespace {

// mu(u^2) and cumulative trapezoid int_0^t E(u) per node
void record_energy(const Generator& gen, const Field& u, std::vector<double>& mean_square,
                   std::vector<double>& energy_integral) {
    const int steps = u.grid().steps();
    const double dt = u.grid().dt();
    mean_square.assign(steps + 1, 0.0);
    energy_integral.assign(steps + 1, 0.0);
    double prev_e = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const StateFunction s = u.slice(k);
        mean_square[k] = integrate(gen.space(), s.cwiseAbs2());
        const double e = dirichlet_form(gen, s);
        if (k > 0) {
            energy_integral[k] = energy_integral[k - 1] + 0.5 * dt * (prev_e + e);
        }
        prev_e = e;
    }
}

}  // namespace

MollifiedSolution solve_mollified(const CornerstoneProblem& problem, double epsilon, int max_iter,
                                  double tol) {
    problem.validate();
    if (!(epsilon > 0.0)) {
        throw DomainError("mollification epsilon must be positive");
    }
    if (!(tol > 0.0)) {
        throw DomainError("tolerance must be positive");
    }
    const Generator& gen = problem.gen;
    const TimeGrid& grid = problem.grid();
    const int steps = grid.steps();
    const double dt = grid.dt();
    const Eigen::Index n = static_cast<Eigen::Index>(gen.size());

    // work in coordinates c = V^T D^{1/2} u, where P_t is diag(exp(lambda t))
    const Eigen::MatrixXd phi = gen.eigenfunctions();  // D^{-1/2} V
    const Eigen::MatrixXd to_modes = phi.transpose() * gen.space().weights().asDiagonal();
    const Eigen::VectorXd& lam = gen.eigenvalues();
    const Eigen::VectorXd step_decay = (dt * lam).array().exp().matrix();
    const Eigen::VectorXd eps_decay = (epsilon * lam).array().exp().matrix();

    Eigen::MatrixXd free_modes(n, steps + 1);  // modes of P_{t_k} f
    const Eigen::VectorXd f_modes = to_modes * problem.f;
    for (int k = 0; k <= steps; ++k) {
        free_modes.col(k) = (grid.time(k) * lam).array().exp().matrix().cwiseProduct(f_modes);
    }

    MollifiedSolution sol{Field(grid, phi * free_modes), {}};
    sol.report.epsilon = epsilon;
    auto record = [&](const Field& u) {
        std::vector<double> ms;
        std::vector<double> ei;
        record_energy(gen, u, ms, ei);
        sol.report.mean_square.push_back(std::move(ms));
        sol.report.energy_integral.push_back(std::move(ei));
    };
    record(sol.u);

    double gap = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::MatrixXd next(n, steps + 1);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
        for (int k = 0; k <= steps; ++k) {
            const StateFunction g =
                -problem.a.values().col(k).cwiseProduct(sol.u.values().col(k)) +
                problem.b.values().col(k);
            const Eigen::VectorXd g_modes = to_modes * g;
            if (k == 0) {
                acc = 0.5 * dt * g_modes;
                next.col(0) = free_modes.col(0);
                continue;
            }
            acc = step_decay.cwiseProduct(acc) + dt * g_modes;
            const Eigen::VectorXd integral = acc - 0.5 * dt * g_modes;
            next.col(k) = free_modes.col(k) + eps_decay.cwiseProduct(integral);
        }
        Field updated(grid, phi * next);
        gap = 0.0;
        for (int k = 0; k <= steps; ++k) {
            const StateFunction d = updated.values().col(k) - sol.u.values().col(k);
            gap = std::max(gap, std::sqrt(integrate(gen.space(), d.cwiseAbs2())));
        }
        sol.u = std::move(updated);
        sol.report.gaps.push_back(gap);
        sol.report.iterations = iter + 1;
        record(sol.u);
        if (gap < tol) {
            return sol;
        }
    }
    throw ConvergenceError("mollified fixed point did not reach tolerance in " +
                               std::to_string(max_iter) + " iterations",
                           gap);
}

Field steklov_average(const Field& field, double h) {
    const TimeGrid& grid = field.grid();
    if (!(h > 0.0) || h > grid.t_end() * (1.0 + 1e-12)) {
        throw DomainError("Steklov width must lie in (0, t_end]");
    }
    const double ratio = h / grid.dt();
    const int m = static_cast<int>(std::lround(ratio));
    if (m < 1 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio)) {
        throw DomainError("Steklov width is not a multiple of the grid step");
    }
    Field out(grid, field.states());
    const Eigen::MatrixXd& v = field.values();
    for (int k = 0; k + m <= grid.steps(); ++k) {
        Eigen::VectorXd acc = 0.5 * (v.col(k) + v.col(k + m));
        for (int j = k + 1; j < k + m; ++j) {
            acc += v.col(j);
        }
        out.set_slice(k, acc / m);
    }
    return out;
}

double nonnegativity_check(const Field& field) {
    return field.min();
}

UniformBound uniform_bound_check(const MollifiedReport& report, const CornerstoneProblem& problem,
                                 double gamma, double c_ls) {
    if (!(c_ls > 0.0)) {
        throw DomainError("LSI constant must be positive");
    }
    if (!(gamma > c_ls)) {
        throw DomainError("uniform bound needs gamma > C_LS");
    }
    if (report.mean_square.empty()) {
        throw DomainError("report holds no iterates");
    }
    const TimeGrid& grid = problem.grid();
    const FiniteMeasureSpace& space = problem.gen.space();
    UniformBound ub;
    ub.kappa_gamma = 1.0 - c_ls / (2.0 * gamma);

    for (int k = 0; k <= grid.steps(); ++k) {
        ub.m_gamma =
            std::max(ub.m_gamma, exp_moment(space, problem.a.slice(k), gamma, 1.0).value);
    }
    const double c = (1.0 + std::log(ub.m_gamma)) / gamma;
    auto eta = [&](double t0) {
        return std::exp(c * t0) * (c * t0 + c_ls / (2.0 * gamma - c_ls));
    };
    int k0 = grid.steps();
    while (k0 > 0 && !(eta(grid.time(k0)) < 1.0)) {
        --k0;
    }
    if (k0 == 0) {
        throw DomainError("no grid time T0 > 0 with eta_T0 < 1");
    }
    ub.t0_reduced = k0 != grid.steps();
    ub.t0 = grid.time(k0);
    ub.eta_t0 = eta(ub.t0);

    double b_norm2 = 0.0;
    for (int k = 0; k <= grid.steps(); ++k) {
        const double w = (k == 0 || k == grid.steps()) ? 0.5 : 1.0;
        b_norm2 += w * grid.dt() * integrate(space, problem.b.slice(k).cwiseAbs2());
    }
    const double f2 = integrate(space, problem.f.cwiseAbs2());
    // alpha = mu(f^2) + gamma ||B||^2 <= max(1, gamma) (mu(f^2) + ||B||^2)
    ub.beta = std::max(1.0, gamma) * std::exp(c * ub.t0) / (1.0 - ub.eta_t0);
    ub.budget = ub.beta * (f2 + b_norm2);

    for (std::size_t it = 0; it < report.mean_square.size(); ++it) {
        for (int k = 0; k <= k0; ++k) {
            const double theta = report.mean_square[it][k] +
                                 2.0 * ub.kappa_gamma * report.energy_integral[it][k];
            ub.theta_sup = std::max(ub.theta_sup, theta);
        }
    }
    return ub;
}

double PolynomialTest::p(double t) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        acc = acc * t + *it;
    }
    return acc;
}

double PolynomialTest::dp(double t) const {
    double acc = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 1;) {
        acc = acc * t + static_cast<double>(j) * coeffs[j];
    }
    return acc;
}

double weak_residual(const Generator& gen, const Field& u, const Field& a, const Field& b,
                     const PolynomialTest& test) {
    if (!(u.grid() == a.grid()) || !(u.grid() == b.grid())) {
        throw StructuralError("weak residual fields must share a grid");
    }
    gen.space().check(test.psi, "test function");
    const FiniteMeasureSpace& space = gen.space();
    const TimeGrid& grid = u.grid();
    const int steps = grid.steps();
    const double t_end = grid.t_end();

    const double lhs_end = test.p(t_end) * integrate(space, u.slice(steps).cwiseProduct(test.psi));
    const double lhs_start = test.p(0.0) * integrate(space, u.slice(0).cwiseProduct(test.psi));

    double time_term = 0.0;
    double energy_term = 0.0;
    double reaction_term = 0.0;
    double source_term = 0.0;
    double size = 0.0;  // Cauchy-Schwarz bound on the pairings, survives cancellation
    const double psi_norm = std::sqrt(integrate(space, test.psi.cwiseProduct(test.psi)));
    for (int k = 0; k <= steps; ++k) {
        const double w = (k == 0 || k == steps ? 0.5 : 1.0) * grid.dt();
        const double t = grid.time(k);
        const StateFunction uk = u.slice(k);
        time_term += w * test.dp(t) * integrate(space, uk.cwiseProduct(test.psi));
        energy_term += w * test.p(t) * dirichlet_form(gen, uk, test.psi);
        reaction_term +=
            w * test.p(t) * integrate(space, a.slice(k).cwiseProduct(uk).cwiseProduct(test.psi));
        source_term += w * test.p(t) * integrate(space, b.slice(k).cwiseProduct(test.psi));
        size = std::max(size, std::abs(test.p(t)) * psi_norm *
                                  std::sqrt(integrate(space, uk.cwiseProduct(uk))));
    }
    const double defect =
        (lhs_end - lhs_start) - (time_term - energy_term - reaction_term + source_term);
    const double scale = std::abs(lhs_end) + std::abs(lhs_start) + std::abs(time_term) +
                         std::abs(energy_term) + std::abs(reaction_term) + std::abs(source_term) +
                         size;
    return scale > 0.0 ? std::abs(defect) / scale : 0.0;
}

}  // namespace rdkin
