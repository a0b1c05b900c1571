#pragma once

#include "rdkin/linear_cornerstone.hpp"
#include "rdkin/markov_generator.hpp"

#include <array>
#include <vector>

namespace rdkin {

/// One Field per species, in the order u1, u2, u3, u4.
using Species = std::vector<Field>;

/// u1 + u2 <-> u3 + u4 at rate lambda; u1, u3 diffuse with C1 L, u2, u4 with C2 L.
struct TwoByTwoProblem {
    Generator gen;
    double c1 = 1.0;
    double c2 = 1.0;
    double lambda = 0.0;
    std::array<StateFunction, 4> f;

    /// Throws DomainError for negative data or non-positive diffusion, StructuralError on size.
    void validate() const;
    double min_c() const { return std::min(c1, c2); }
    Generator species_generator(int i) const { return gen.scaled(i % 2 == 0 ? c1 : c2); }
};

struct IterationReport {
    std::vector<double> sigma;     ///< sup_t Sigma_n for n = 1, 2, ...
    std::vector<double> sup_gaps;  ///< sup over (t, x, i) of |u^(n) - u^(n-1)|
    std::vector<double> ratios;    ///< sigma[n] / sigma[n-1], n >= 2 (0 once at round-off)
    double eta_predicted = 0.0;    ///< eta(T) from the displayed formula
    double eta_limit = 0.0;        ///< 2 lambda C_LS / gamma, the formula's T -> 0 value
    double eta_limit_text = 0.0;   ///< 4 lambda C_LS / gamma
    double eta_measured = 0.0;     ///< max of ratios
    double D = 0.0;
    double D_alpha2 = 0.0;         ///< same with (f1 + f3)^2, (f2 + f4)^2
    double M_gamma = 1.0;
    double gamma = 0.0;
    double kappa = 0.0;
    double c_ls = 0.0;
    double t_end = 0.0;
    double conservation_residual = 0.0;  ///< max over all iterates
    double positivity_min = 0.0;         ///< min over all iterates
    double moment_slack = 0.0;           ///< min relative slack over the alpha/gamma table
    double uniform_bound_ratio = 0.0;    ///< max_n,t Sigma_n(t) / (e^{4 lambda D t / gamma} mu|f|^2)
    int n_converged = 0;
};

struct TwoByTwoSolution {
    Species u;
    IterationReport report;
    std::vector<Species> iterates;  ///< u^(0), u^(1), ... when requested
};

struct IterateOptions {
    int max_n = 60;
    double tol = 1e-22;  ///< on sup_t Sigma_n, squared concentration units
    bool keep_iterates = false;
};

/// gamma = 8 lambda C_LS / min(C1, C2), twice the lower bound 4 lambda C_LS / min(C1, C2).
double choose_gamma(const TwoByTwoProblem& problem, double c_ls);

/// u_i(t) = P_{C_i t} f_i.
Species heat_flows(const TwoByTwoProblem& problem, const TimeGrid& grid);

/// P_{C1 t}(f1 + f3) and P_{C2 t}(f2 + f4) on the grid.
std::array<Field, 2> paired_sums(const TwoByTwoProblem& problem, const TimeGrid& grid);

/// The four affine equations with A = lambda P_{C_j t}(paired sum), B = lambda P_{C_i t}(own
/// paired sum) times the matching component of u_prev.
Species decoupled_step(const TwoByTwoProblem& problem, const Species& u_prev, const TimeGrid& grid);

/// max(log mu(e^{gamma (f1 + f3)^alpha}), log mu(e^{gamma (f2 + f4)^alpha})).
double constant_D(const TwoByTwoProblem& problem, double gamma, double alpha = 1.0);

/// (2 lambda / gamma) e^{4 lambda D T / gamma} (D T + C_LS).
double eta_T(double lambda, double gamma, double D, double c_ls, double T);

/// Largest T = 2^k, k <= 3, with eta(T) <= eta_max; throws DomainError if none down to 2^-30.
double auto_select_T(const TwoByTwoProblem& problem, double gamma, double c_ls,
                     double eta_max = 0.9);

/// Sigma_n(t_k) = mu(|u_n - u_prev|^2) + 2 kappa int_0^t E(u_n - u_prev), trapezoid.
std::vector<double> sigma_n(const Species& u_n, const Species& u_prev, const Generator& gen,
                            double kappa);

/// sup |u1 + u3 - P_{C1 t}(f1 + f3)| and |u2 + u4 - P_{C2 t}(f2 + f4)|.
double conservation_residual(const Species& u, const TwoByTwoProblem& problem);

/// min over nodes, species, alpha in {1, 2}, gamma in {0.5, 1, 2} of the slack
/// (max bound moment - moment) / (1 + max bound moment).
double moment_slack(const Species& u, const TwoByTwoProblem& problem);

/// Picard sequence from the heat flows. Throws DomainError if eta(t_end) >= 1 and
/// ConvergenceError after max_n iterations.
TwoByTwoSolution iterate(const TwoByTwoProblem& problem, const TimeGrid& grid, double gamma,
                         double c_ls, const IterateOptions& options = {});

struct ChainResult {
    Species u;  ///< on [0, n T_step]
    std::vector<IterationReport> reports;
    std::vector<double> seam_moment_slack;  ///< per seam, min over alpha/gamma table
};

/// Restart iterate from the final slice of each interval, recomputing D per interval.
ChainResult chain_intervals(const TwoByTwoProblem& problem, double T_step, int n_intervals,
                            int steps_per_interval, double gamma, double c_ls,
                            const IterateOptions& options = {});

/// Normalized defect of the four weak equations at t_end.
double weak_residual_rdp(const Species& u, const TwoByTwoProblem& problem,
                         const std::array<PolynomialTest, 4>& tests);

}  // namespace rdkin
