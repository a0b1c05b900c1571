#pragma once

#include "rdkin/markov_generator.hpp"
#include "rdkin/measure_space.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace rdkin {

/// Uniform grid t_k = k * dt on [0, t_end], k = 0..steps.
class TimeGrid {
public:
    TimeGrid(double t_end, int steps);

    double t_end() const noexcept { return t_end_; }
    int steps() const noexcept { return steps_; }
    double dt() const noexcept { return t_end_ / steps_; }
    double time(int k) const noexcept { return k == steps_ ? t_end_ : k * dt(); }
    TimeGrid refined(int factor) const;

    bool operator==(const TimeGrid& other) const;

private:
    double t_end_;
    int steps_;
};

/// Time-indexed family of state functions; column k holds u(t_k, .).
class Field {
public:
    Field(TimeGrid grid, std::size_t states);
    Field(TimeGrid grid, Eigen::MatrixXd values);

    static Field constant(const TimeGrid& grid, const StateFunction& f);
    static Field from_function(const TimeGrid& grid, std::size_t states,
                               const std::function<StateFunction(double)>& fn);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t states() const noexcept { return static_cast<std::size_t>(values_.rows()); }

    StateFunction slice(int k) const { return values_.col(k); }
    void set_slice(int k, const StateFunction& f);

    /// Piecewise-linear value at time t in [0, t_end].
    StateFunction at(double t) const;

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    Eigen::MatrixXd& values() noexcept { return values_; }

    double min() const { return values_.minCoeff(); }

private:
    TimeGrid grid_;
    Eigen::MatrixXd values_;
};

/// max over (t_k, x) of |a - b|; grids must match.
double sup_distance(const Field& a, const Field& b);

/// du/dt = L u - A(t) u + B(t), u(0) = f, with A and B given on the grid.
struct CornerstoneProblem {
    Generator gen;
    Field a;
    Field b;
    StateFunction f;

    void validate() const;
    const TimeGrid& grid() const { return a.grid(); }
};

struct MollifiedReport {
    double epsilon = 0.0;
    std::vector<double> gaps;  ///< sup_k ||u_{n+1}(t_k) - u_n(t_k)||_{L2(mu)}
    /// per iterate n (n = 0 is P_t f), per node: mu(u_n^2) and int_0^t E(u_n)
    std::vector<std::vector<double>> mean_square;
    std::vector<std::vector<double>> energy_integral;
    int iterations = 0;
};

struct MollifiedSolution {
    Field u;
    MollifiedReport report;
};

/// Picard iterates of u_{n+1}(t) = P_t f + int_0^t P_{eps + t - s}(-A u_n + B)(s) ds with
/// trapezoid quadrature, started from u_0(t) = P_t f.
MollifiedSolution solve_mollified(const CornerstoneProblem& problem, double epsilon,
                                  int max_iter = 200, double tol = 1e-10);

/// The unmollified problem by Strang splitting: half step of the pointwise affine flow with
/// coefficients frozen at the step's left node, exact P_h, half step frozen at the right node.
/// A and B are interpolated linearly on the refined grid.
Field solve_cornerstone(const CornerstoneProblem& problem, int substeps = 1);

/// One step u -> exp(-a h) u + (1 - exp(-a h)) b / a, pointwise, stable as a -> 0.
StateFunction affine_flow(const StateFunction& u, const StateFunction& a, const StateFunction& b,
                          double h);

/// a_h(v)(t) = (1/h) int_t^{t+h} v, trapezoid; zero where t + h > t_end.
Field steklov_average(const Field& field, double h);

double nonnegativity_check(const Field& field);

struct UniformBound {
    double theta_sup = 0.0;
    double budget = 0.0;
    double kappa_gamma = 0.0;
    double beta = 0.0;
    double m_gamma = 1.0;
    double eta_t0 = 0.0;
    double t0 = 0.0;
    bool t0_reduced = false;  ///< eta < 1 failed at t_end and T0 was shrunk

    bool holds() const { return theta_sup <= budget * (1.0 + 1e-12) + 1e-300; }
};

/// theta_n(t) = mu(u_n^2) + 2 kappa int_0^t E(u_n), kappa = 1 - C_LS / (2 gamma), against
/// beta (mu(f^2) + ||B||^2_{L2(0,T;L2)}). Throws DomainError unless gamma > C_LS.
UniformBound uniform_bound_check(const MollifiedReport& report, const CornerstoneProblem& problem,
                                 double gamma, double c_ls);

/// Test function phi(t, x) = p(t) psi(x) with polynomial p.
struct PolynomialTest {
    std::vector<double> coeffs;  ///< p(t) = sum coeffs[j] t^j
    StateFunction psi;

    double p(double t) const;
    double dp(double t) const;
};

/// Defect of mu(u(T) phi(T)) - mu(f phi(0)) = int_0^T [mu(u d_t phi) - E(u, phi) - mu(A u phi)
/// + mu(B phi)] ds at T = t_end, trapezoid in time, divided by the sum of the term magnitudes
/// plus max_t |p(t)| ||u(t)|| ||psi||.
double weak_residual(const Generator& gen, const Field& u, const Field& a, const Field& b,
                     const PolynomialTest& test);

}  // namespace rdkin
