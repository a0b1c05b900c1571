#pragma once

#include "rdkin/markov_generator.hpp"
#include "rdkin/measure_space.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace rdkin::testing {

/// Seeded source of random spaces, functions and generators for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>()(rng_); }

    FiniteMeasureSpace space(int n) {
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; ++i) w(i) = uniform(0.1, 2.0);
        return FiniteMeasureSpace(w / w.sum());
    }

    StateFunction function(int n, double lo, double hi) {
        StateFunction f(n);
        for (int i = 0; i < n; ++i) f(i) = uniform(lo, hi);
        return f;
    }

    StateFunction gaussian(int n, double scale = 1.0) {
        StateFunction f(n);
        for (int i = 0; i < n; ++i) f(i) = scale * normal();
        return f;
    }

    /// Reversible generator with random conductances on a random connected graph.
    Generator reversible(int n) {
        const FiniteMeasureSpace sp = space(n);
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i + 1 < n; ++i) c(i, i + 1) = c(i + 1, i) = uniform(0.2, 2.0);
        for (int k = 0; k < n; ++k) {
            const int i = integer(0, n - 1), j = integer(0, n - 1);
            if (i != j) c(i, j) = c(j, i) = uniform(0.1, 1.0);
        }
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (i != j) l(i, j) = c(i, j) / sp.weight(static_cast<std::size_t>(i));
            l(i, i) = -l.row(i).sum();
        }
        return Generator(sp, l);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Two-point uniform space with the flip generator [[-1, 1], [1, -1]].
inline Generator two_point() {
    Eigen::MatrixXd l(2, 2);
    l << -1, 1, 1, -1;
    return Generator(FiniteMeasureSpace::uniform(2), l);
}

}  // namespace rdkin::testing
