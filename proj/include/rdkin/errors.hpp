#pragma once

#include <stdexcept>
#include <string>

namespace rdkin {

/// Shape or dimension mismatch between objects that must share a state space or grid.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (negative time, f < 0, eta >= 1, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Ill-formed reaction description (catalysts, empty consumed/produced sets).
class SpecificationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A fixed-point or time-stepping loop stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_gap)
        : std::runtime_error(what), last_gap_(last_gap) {}

    double last_gap() const noexcept { return last_gap_; }

private:
    double last_gap_;
};

}  // namespace rdkin
