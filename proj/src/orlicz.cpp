#include "rdkin/orlicz.hpp"

#include "rdkin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdkin {

namespace {

// log mu(exp(s h)), h >= 0
double log_moment(const FiniteMeasureSpace& space, const StateFunction& h, double s) {
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < h.size(); ++x) {
        shift = std::max(shift, std::log(space.weights()(x)) + s * h(x));
    }
    double acc = 0.0;
    for (Eigen::Index x = 0; x < h.size(); ++x) {
        acc += std::exp(std::log(space.weights()(x)) + s * h(x) - shift);
    }
    return shift + std::log(acc);
}

}  // namespace

YoungExp::YoungExp(double alpha) : alpha_(alpha) {
    if (!(alpha >= 1.0) || !std::isfinite(alpha)) {
        throw DomainError("Young function exponent must be >= 1");
    }
}

double YoungExp::operator()(double x) const {
    return std::expm1(std::pow(std::abs(x), alpha_));
}

double YoungExp::inverse_of_one() const {
    return std::pow(std::log(2.0), 1.0 / alpha_);
}

double modular(const FiniteMeasureSpace& space, const StateFunction& f, const YoungExp& phi) {
    space.check(f);
    double acc = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        acc += space.weights()(x) * phi(f(x));
    }
    return acc;
}

double gauge_norm(const FiniteMeasureSpace& space, const StateFunction& f, const YoungExp& phi,
                  double tol) {
    space.check(f);
    if (!(tol > 0.0)) {
        throw DomainError("gauge_norm tolerance must be positive");
    }
    const StateFunction h = abs_pow(f, phi.alpha());
    Eigen::Index top = 0;
    const double hmax = h.maxCoeff(&top);
    if (hmax == 0.0) {
        return 0.0;
    }
    // with s = lambda^{-alpha}, solve log mu(exp(s h)) = log 2, increasing in s
    const double log2 = std::log(2.0);
    double lo = log2 / hmax;
    double hi = (log2 - std::log(space.weights()(top))) / hmax;
    if (log_moment(space, h, hi) < log2) {
        hi *= 2.0;  // rounding guard
    }
    const double rel = 0.25 * phi.alpha() * tol;
    for (int iter = 0; iter < 200 && hi / lo - 1.0 > rel; ++iter) {
        const double mid = std::sqrt(lo * hi);
        if (log_moment(space, h, mid) <= log2) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lambda decreases in s; the feasible side is lo
    return std::pow(lo, -1.0 / phi.alpha());
}

EntropicBound entropic_bound(const FiniteMeasureSpace& space, const StateFunction& f,
                             const StateFunction& g, double gamma) {
    space.check(f, "f");
    space.check(g, "g");
    if (!(gamma > 0.0)) {
        throw DomainError("entropic_bound requires gamma > 0");
    }
    // entropy() rejects negative or null f
    const double ent = entropy(space, f);
    const double mean = integrate(space, f);
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < g.size(); ++x) {
        shift = std::max(shift, std::log(space.weights()(x)) + gamma * g(x));
    }
    double acc = 0.0;
    for (Eigen::Index x = 0; x < g.size(); ++x) {
        acc += std::exp(std::log(space.weights()(x)) + gamma * g(x) - shift);
    }
    const double log_mom = shift + std::log(acc);

    EntropicBound out;
    out.lhs = integrate(space, f.cwiseProduct(g));
    out.rhs = ent / gamma + mean * log_mom / gamma;
    return out;
}

JensenCheck jensen_contraction_check(const Generator& gen, const StateFunction& f,
                                     const YoungExp& phi, double t) {
    const StateFunction pf = semigroup_apply(gen, t, f);
    JensenCheck out;
    out.before = modular(gen.space(), f, phi);
    out.after = t == 0.0 ? out.before : modular(gen.space(), pf, phi);
    out.norm_before = gauge_norm(gen.space(), f, phi);
    out.norm_after = t == 0.0 ? out.norm_before : gauge_norm(gen.space(), pf, phi);
    return out;
}

double moment_bound_check(const FiniteMeasureSpace& space, const StateFunction& u,
                          const StateFunction& bound1, const StateFunction& bound2, double gamma,
                          double alpha) {
    space.check(u, "u");
    if (u.size() > 0 && u.minCoeff() < -1e-10) {
        throw DomainError("moment_bound_check expects a nonnegative function");
    }
    const double b = std::max(exp_moment(space, bound1, gamma, alpha).value,
                              exp_moment(space, bound2, gamma, alpha).value);
    return b - exp_moment(space, u.cwiseMax(0.0), gamma, alpha).value;
}

L1Comparison l1_comparison_constants() {
    // Phi_1(x) = e^|x| - 1 >= |x| everywhere, so tau = 1 works with M = Phi_1^{-1}(1)
    return {YoungExp(1.0).inverse_of_one(), 1.0};
}

}  // namespace rdkin
