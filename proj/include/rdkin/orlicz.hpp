#pragma once

#include "rdkin/markov_generator.hpp"
#include "rdkin/measure_space.hpp"

namespace rdkin {

/// Phi_alpha(x) = exp(|x|^alpha) - 1, alpha >= 1.
class YoungExp {
public:
    explicit YoungExp(double alpha);

    double alpha() const noexcept { return alpha_; }
    double operator()(double x) const;

    /// Phi_alpha^{-1}(1) = (ln 2)^{1/alpha}.
    double inverse_of_one() const;

private:
    double alpha_;
};

/// mu(Phi(f)), summed with expm1 per state; +inf if any term overflows.
double modular(const FiniteMeasureSpace& space, const StateFunction& f, const YoungExp& phi);

/// Luxemburg norm inf{lambda > 0 : mu(Phi(f / lambda)) <= 1}, bisection to relative `tol`.
double gauge_norm(const FiniteMeasureSpace& space, const StateFunction& f, const YoungExp& phi,
                  double tol = 1e-10);

struct EntropicBound {
    double lhs = 0.0;  ///< mu(f g)
    double rhs = 0.0;  ///< Ent(f) / gamma + mu(f) log mu(exp(gamma g)) / gamma

    bool holds(double rel = 1e-10) const { return lhs <= rhs + rel * (1.0 + std::abs(rhs)); }
};

/// Both sides of mu(f g) <= (1/gamma) mu(f log(f / mu f)) + (mu f / gamma) log mu(e^{gamma g}).
EntropicBound entropic_bound(const FiniteMeasureSpace& space, const StateFunction& f,
                             const StateFunction& g, double gamma);

struct JensenCheck {
    double before = 0.0;  ///< mu(Phi(f))
    double after = 0.0;   ///< mu(Phi(P_t f))
    double norm_before = 0.0;
    double norm_after = 0.0;

    bool holds(double rel = 1e-8) const {
        return after <= before + rel * (1.0 + before) && norm_after <= norm_before * (1.0 + rel);
    }
};

JensenCheck jensen_contraction_check(const Generator& gen, const StateFunction& f,
                                     const YoungExp& phi, double t);

/// max(mu e^{gamma |b1|^alpha}, mu e^{gamma |b2|^alpha}) - mu e^{gamma |u|^alpha}.
double moment_bound_check(const FiniteMeasureSpace& space, const StateFunction& u,
                          const StateFunction& bound1, const StateFunction& bound2, double gamma,
                          double alpha);

/// Constants of ||f||_1 <= (M + tau) ||f||_{Phi_1}, with |x| <= tau Phi_1(x) once |x| >= M.
struct L1Comparison {
    double m = 0.0;
    double tau = 0.0;

    double factor() const { return m + tau; }
};

L1Comparison l1_comparison_constants();

}  // namespace rdkin
