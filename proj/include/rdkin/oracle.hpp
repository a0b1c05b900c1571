#pragma once

#include "rdkin/linear_cornerstone.hpp"
#include "rdkin/markov_generator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace rdkin {

/// dy/dt = rhs(t, y) in dimension `dimension`.
struct OdeSystem {
    std::size_t dimension = 0;
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)> rhs;
};

struct OdeOptions {
    double rtol = 1e-11;
    double atol = 1e-13;
    double h_min = 1e-13;          ///< relative to t_end; below this the explicit pair gives up
    long max_steps = 5'000'000;
    bool implicit_fallback = true;  ///< continue with implicit trapezoid after step underflow
    bool force_implicit = false;
    int implicit_substeps = 64;     ///< implicit trapezoid steps per grid interval
};

struct OdeResult {
    Eigen::MatrixXd samples;  ///< column k = y(t_k)
    long accepted = 0;
    long rejected = 0;
    bool used_fallback = false;
};

/// Dormand-Prince 5(4) with dense output, sampled on the grid nodes.
OdeResult integrate_reference(const OdeSystem& system, const Eigen::VectorXd& y0,
                              const TimeGrid& grid, const OdeOptions& options = {});

/// Method of lines for du_i/dt = L_i u_i + lambda_i (beta_i - alpha_i)(prod u^alpha - prod u^beta)
/// with dense generator matrices L_i, one per species.
OdeSystem mass_action_system(std::vector<Eigen::MatrixXd> generators, std::vector<int> alpha,
                             std::vector<int> beta, std::vector<double> lambda);

/// Full nonlinear reference trajectory, one Field per species.
std::vector<Field> mass_action_reference(const std::vector<Eigen::MatrixXd>& generators,
                                         const std::vector<int>& alpha,
                                         const std::vector<int>& beta,
                                         const std::vector<double>& lambda,
                                         const std::vector<StateFunction>& f, const TimeGrid& grid,
                                         const OdeOptions& options = {});

/// du/dt = L u - A(t) u + B(t), A and B piecewise linear in time between grid nodes.
Field cornerstone_reference(const Eigen::MatrixXd& generator, const Field& a, const Field& b,
                            const StateFunction& f, const OdeOptions& options = {});

/// Random search over positive and near-constant functions with coordinate pattern-search
/// polish, plus a separate polish of the near-constant limit 2 mu(v^2) / E(v).
LsiEstimate maximize_lsi_ratio(const Generator& gen, int restarts, int iters,
                               std::uint64_t seed = 0xfeed);

}  // namespace rdkin
