#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>

namespace rdkin {

/// Real function on the states of a finite space; one entry per state.
using StateFunction = Eigen::VectorXd;

/// Finite probability space: N states with strictly positive masses summing to one.
///
/// Weights within 1e-9 of a unit total are renormalized; anything further off is
/// rejected, as are non-positive masses.
class FiniteMeasureSpace {
public:
    explicit FiniteMeasureSpace(Eigen::VectorXd weights);

    static FiniteMeasureSpace uniform(std::size_t n);

    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    double weight(std::size_t x) const { return weights_(static_cast<Eigen::Index>(x)); }

    /// Throws StructuralError unless f has one entry per state.
    void check(const StateFunction& f, const char* what = "state function") const;

    bool operator==(const FiniteMeasureSpace& other) const;

private:
    Eigen::VectorXd weights_;
};

/// mu(f).
double integrate(const FiniteMeasureSpace& space, const StateFunction& f);

/// Ent_mu(f) = mu(f log f) - mu(f) log mu(f) for f >= 0, with 0 log 0 = 0.
///
/// Evaluated as mu(f) * mu(phi(f / mu(f) - 1)), phi(x) = (1 + x) log(1 + x) - x, so the
/// result keeps full relative accuracy when f is close to a constant.
double entropy(const FiniteMeasureSpace& space, const StateFunction& f);

/// phi(x) = (1 + x) log(1 + x) - x on [-1, inf), accurate near 0.
double entropy_kernel(double x);

struct ExpMoment {
    double value = 1.0;      ///< mu(exp(gamma |f|^alpha)); +inf when it overflows
    double log_value = 0.0;  ///< always finite
    std::optional<std::size_t> overflow_state;  ///< state whose exponent overflowed

    bool overflowed() const noexcept { return overflow_state.has_value(); }
};

/// mu(exp(gamma |f|^alpha)), computed in log-sum-exp form.
ExpMoment exp_moment(const FiniteMeasureSpace& space, const StateFunction& f, double gamma,
                     double alpha);

/// Pointwise |f|^p.
StateFunction abs_pow(const StateFunction& f, double p);

}  // namespace rdkin
