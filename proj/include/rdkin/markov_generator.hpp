#pragma once

#include "rdkin/measure_space.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace rdkin {

/// Reversible Markov generator on a finite measure space.
///
/// The constructor validates the Markov and detailed-balance structure and diagonalizes
/// the mu-symmetrized matrix diag(sqrt mu) L diag(1/sqrt mu) once; every semigroup
/// application afterwards is a pair of dense products in that eigenbasis.
class Generator {
public:
    Generator(FiniteMeasureSpace space, Eigen::MatrixXd matrix);

    /// Nearest-neighbour jumps at `rate` on the n-cycle (n >= 3), uniform measure.
    static Generator ring(std::size_t n, double rate);

    /// Nearest-neighbour chain reversible w.r.t. the normalized `weights`
    /// (Metropolis rates rate * min(1, mu_y / mu_x)).
    static Generator birth_death(const Eigen::VectorXd& weights, double rate = 1.0);

    const FiniteMeasureSpace& space() const noexcept { return space_; }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    std::size_t size() const noexcept { return space_.size(); }

    /// Eigenvalues of L, descending (the first is 0), all <= 0.
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

    /// L2(mu)-orthonormal eigenfunctions, one per column, matching eigenvalues().
    Eigen::MatrixXd eigenfunctions() const;

    /// Smallest nonzero eigenvalue of -L; 0 when the chain is reducible.
    double spectral_gap() const;

    /// c * L, sharing the eigenbasis (no new diagonalization).
    Generator scaled(double c) const;

    /// L f.
    StateFunction apply(const StateFunction& f) const;

    /// Dense matrix of P_t = exp(t L).
    Eigen::MatrixXd semigroup_matrix(double t) const;

private:
    Generator() = default;

    FiniteMeasureSpace space_{Eigen::VectorXd::Ones(1)};
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd basis_;  // orthonormal eigenvectors of the symmetrized matrix
    Eigen::VectorXd sqrt_mu_;
};

/// E(u, v) = -mu(v L u).
double dirichlet_form(const Generator& gen, const StateFunction& u, const StateFunction& v);

/// E(u, u).
inline double dirichlet_form(const Generator& gen, const StateFunction& u) {
    return dirichlet_form(gen, u, u);
}

/// exp(t L) f; throws DomainError for t < 0.
StateFunction semigroup_apply(const Generator& gen, double t, const StateFunction& f);

/// max over the spectrum of (s xi)^2 exp(-2 s xi), xi in spec(-L): the finite-space value of
/// the constant bounding ||L P_s f||^2 <= C mu(f^2) / s^2.
double semigroup_derivative_constant(const Generator& gen, double s);

struct LsiEstimate {
    double constant = 0.0;
    StateFunction witness;  ///< function realizing constant up to 1e-6 relative
    int restarts = 0;
};

/// Ent_mu(u^2) / E(u) for non-constant u.
double lsi_ratio(const Generator& gen, const StateFunction& u);

/// Estimate of the smallest C with Ent_mu(u^2) <= C E(u), by multi-start projected gradient
/// ascent on the unit L2(mu) sphere, combined with the near-constant limit 2 / gap.
/// Throws DomainError for reducible generators.
LsiEstimate estimate_lsi_constant(const Generator& gen, int restarts, double tol,
                                  std::uint64_t seed = 0x5eed);

}  // namespace rdkin
