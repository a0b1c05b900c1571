#include "rdkin/measure_space.hpp"

#include "rdkin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rdkin {

FiniteMeasureSpace::FiniteMeasureSpace(Eigen::VectorXd weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) {
        throw StructuralError("measure space needs at least one state");
    }
    for (Eigen::Index x = 0; x < weights_.size(); ++x) {
        if (!(weights_(x) > 0.0) || !std::isfinite(weights_(x))) {
            throw DomainError("measure weight of state " + std::to_string(x) +
                              " is not strictly positive");
        }
    }
    const double total = weights_.sum();
    if (std::abs(total - 1.0) > 1e-9) {
        throw DomainError("measure weights sum to " + std::to_string(total) + ", expected 1");
    }
    weights_ /= total;
}

FiniteMeasureSpace FiniteMeasureSpace::uniform(std::size_t n) {
    if (n == 0) {
        throw StructuralError("measure space needs at least one state");
    }
    return FiniteMeasureSpace(
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

void FiniteMeasureSpace::check(const StateFunction& f, const char* what) const {
    if (f.size() != weights_.size()) {
        throw StructuralError(std::string(what) + " has " + std::to_string(f.size()) +
                              " entries but the space has " + std::to_string(weights_.size()) +
                              " states");
    }
}

bool FiniteMeasureSpace::operator==(const FiniteMeasureSpace& other) const {
    return weights_.size() == other.weights_.size() &&
           (weights_ - other.weights_).cwiseAbs().maxCoeff() <= 1e-15;
}

double integrate(const FiniteMeasureSpace& space, const StateFunction& f) {
    space.check(f);
    return space.weights().dot(f);
}

double entropy_kernel(double x) {
    if (std::abs(x) < 0.1) {
        // sum_{k>=2} (-x)^k / (k (k - 1))
        double term = x * x;
        double sum = 0.0;
        for (int k = 2; k < 40; ++k) {
            const double add = term / (static_cast<double>(k) * (k - 1));
            sum += add;
            if (std::abs(add) <= 1e-18 * std::abs(sum)) {
                break;
            }
            term *= -x;
        }
        return sum;
    }
    if (x <= -1.0) {
        return 1.0;  // 0 log 0 = 0
    }
    return (1.0 + x) * std::log1p(x) - x;
}

double entropy(const FiniteMeasureSpace& space, const StateFunction& f) {
    space.check(f);
    if (f.minCoeff() < 0.0) {
        throw DomainError("entropy requires a nonnegative function");
    }
    const double mean = integrate(space, f);
    if (!(mean > 0.0)) {
        throw DomainError("entropy of the zero function is undefined");
    }
    double acc = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        acc += space.weights()(x) * entropy_kernel(f(x) / mean - 1.0);
    }
    return mean * acc;
}

StateFunction abs_pow(const StateFunction& f, double p) {
    StateFunction out(f.size());
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        const double a = std::abs(f(x));
        out(x) = p == 1.0 ? a : (p == 2.0 ? a * a : std::pow(a, p));
    }
    return out;
}

ExpMoment exp_moment(const FiniteMeasureSpace& space, const StateFunction& f, double gamma,
                     double alpha) {
    space.check(f);
    if (!(gamma > 0.0)) {
        throw DomainError("exp_moment requires gamma > 0");
    }
    if (!(alpha >= 1.0)) {
        throw DomainError("exp_moment requires alpha >= 1");
    }
    const StateFunction exponent = gamma * abs_pow(f, alpha);
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        const double e = std::log(space.weights()(x)) + exponent(x);
        shift = std::max(shift, e);
    }
    double acc = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        acc += std::exp(std::log(space.weights()(x)) + exponent(x) - shift);
    }
    ExpMoment result;
    result.log_value = shift + std::log(acc);
    if (result.log_value >= std::log(std::numeric_limits<double>::max())) {
        result.value = std::numeric_limits<double>::infinity();
        Eigen::Index worst = 0;
        exponent.maxCoeff(&worst);
        result.overflow_state = static_cast<std::size_t>(worst);
    } else {
        result.value = std::exp(result.log_value);
        // mu(e^g) >= 1 always; clamp rounding below 1
        if (result.value < 1.0) {
            result.value = 1.0;
            result.log_value = 0.0;
        }
    }
    return result;
}

}  // namespace rdkin
