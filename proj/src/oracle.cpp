#include "rdkin/oracle.hpp"

#include "rdkin/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace rdkin {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense output
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double rms(const Eigen::VectorXd& v) {
    return std::sqrt(v.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, v.size())));
}

// implicit trapezoid from t0 to t1 in `n` steps, Newton with a finite-difference Jacobian
Eigen::VectorXd implicit_trapezoid(const OdeSystem& sys, double t0, double t1,
                                   Eigen::VectorXd y, int n, const OdeOptions& opt) {
    const Eigen::Index d = static_cast<Eigen::Index>(sys.dimension);
    const double h = (t1 - t0) / n;
    Eigen::VectorXd f0(d), f1(d), fp(d);
    Eigen::MatrixXd jac(d, d);
    for (int s = 0; s < n; ++s) {
        const double t = t0 + s * h;
        sys.rhs(t, y, f0);
        Eigen::VectorXd z = y + h * f0;
        for (int newton = 0; newton < 50; ++newton) {
            sys.rhs(t + h, z, f1);
            const Eigen::VectorXd res = z - y - 0.5 * h * (f0 + f1);
            for (Eigen::Index j = 0; j < d; ++j) {
                const double dz = 1e-7 * std::max(1.0, std::abs(z(j)));
                Eigen::VectorXd zp = z;
                zp(j) += dz;
                sys.rhs(t + h, zp, fp);
                jac.col(j) = (fp - f1) / dz;
            }
            const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - 0.5 * h * jac;
            const Eigen::VectorXd delta = m.partialPivLu().solve(res);
            z -= delta;
            const Eigen::VectorXd sc =
                (opt.atol + opt.rtol * z.array().abs()).matrix();
            if (rms(delta.cwiseQuotient(sc)) < 1e-3) {
                break;
            }
        }
        y = z;
    }
    return y;
}

}  // namespace

OdeResult integrate_reference(const OdeSystem& sys, const Eigen::VectorXd& y0,
                              const TimeGrid& grid, const OdeOptions& opt) {
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) {
        throw DomainError("integrate_reference needs rtol > 0 and atol > 0");
    }
    const Eigen::Index d = static_cast<Eigen::Index>(sys.dimension);
    if (y0.size() != d) {
        throw StructuralError("initial state has the wrong dimension");
    }
    OdeResult out;
    out.samples.resize(d, grid.steps() + 1);
    out.samples.col(0) = y0;

    if (opt.force_implicit) {
        Eigen::VectorXd y = y0;
        for (int k = 0; k < grid.steps(); ++k) {
            y = implicit_trapezoid(sys, grid.time(k), grid.time(k + 1), y, opt.implicit_substeps,
                                   opt);
            out.samples.col(k + 1) = y;
        }
        out.used_fallback = true;
        return out;
    }

    const double t_end = grid.t_end();
    auto scale = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return (opt.atol + opt.rtol * a.array().abs().max(b.array().abs())).matrix().eval();
    };

    Eigen::VectorXd y = y0;
    Eigen::VectorXd k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d);
    sys.rhs(0.0, y, k1);

    // initial step
    double h;
    {
        const Eigen::VectorXd sc = scale(y, y);
        const double n0 = rms(y.cwiseQuotient(sc));
        const double n1 = rms(k1.cwiseQuotient(sc));
        double h0 = (n0 < 1e-5 || n1 < 1e-5) ? 1e-6 : 0.01 * n0 / n1;
        h0 = std::min(h0, t_end);
        const Eigen::VectorXd y1 = y + h0 * k1;
        Eigen::VectorXd f1(d);
        sys.rhs(h0, y1, f1);
        const double n2 = rms((f1 - k1).cwiseQuotient(sc)) / h0;
        const double big = std::max(n1, n2);
        const double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 0.2);
        h = std::min({100.0 * h0, h1, t_end});
    }

    double t = 0.0;
    int next = 1;
    const double h_floor = opt.h_min * t_end;
    while (next <= grid.steps()) {
        if (out.accepted + out.rejected > opt.max_steps) {
            throw ConvergenceError("reference integrator exceeded its step budget", h);
        }
        if (h < h_floor) {
            if (!opt.implicit_fallback) {
                throw ConvergenceError(
                    "reference integrator step size underflow at t = " + std::to_string(t) +
                        "; the system looks stiff, reduce lambda or enable the implicit fallback",
                    h);
            }
            // finish on the grid with the implicit trapezoid
            out.used_fallback = true;
            double ts = t;
            for (; next <= grid.steps(); ++next) {
                y = implicit_trapezoid(sys, ts, grid.time(next), y, opt.implicit_substeps, opt);
                ts = grid.time(next);
                out.samples.col(next) = y;
            }
            return out;
        }
        const bool last = t + h >= t_end * (1.0 - 1e-15);
        if (last) {
            h = t_end - t;
        }
        sys.rhs(t + c2 * h, y + h * (a21 * k1), k2);
        sys.rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2), k3);
        sys.rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
        sys.rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
        const Eigen::VectorXd y6 = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        sys.rhs(t + h, y6, k6);
        const Eigen::VectorXd y_new =
            y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        sys.rhs(t + h, y_new, k7);
        const Eigen::VectorXd err =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err_norm = rms(err.cwiseQuotient(scale(y, y_new)));

        if (!std::isfinite(err_norm) || err_norm > 1.0) {
            ++out.rejected;
            const double fac = std::isfinite(err_norm) ? 0.9 * std::pow(err_norm, -0.2) : 0.1;
            h *= std::clamp(fac, 0.1, 0.9);
            continue;
        }

        // dense output coefficients
        const Eigen::VectorXd r1 = y;
        const Eigen::VectorXd r2 = y_new - y;
        const Eigen::VectorXd r3 = h * k1 - r2;
        const Eigen::VectorXd r4 = r2 - h * k7 - r3;
        const Eigen::VectorXd r5 =
            h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        const double t_new = last ? t_end : t + h;
        while (next <= grid.steps() && grid.time(next) <= t_new) {
            if (next == grid.steps() && last) {
                out.samples.col(next) = y_new;
            } else {
                const double th = (grid.time(next) - t) / h;
                const double th1 = 1.0 - th;
                out.samples.col(next) = r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
            }
            ++next;
        }

        ++out.accepted;
        t = t_new;
        y = y_new;
        k1 = k7;
        const double fac = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
    }
    return out;
}

OdeSystem mass_action_system(std::vector<Eigen::MatrixXd> generators, std::vector<int> alpha,
                             std::vector<int> beta, std::vector<double> lambda) {
    const std::size_t q = generators.size();
    if (q == 0 || alpha.size() != q || beta.size() != q || lambda.size() != q) {
        throw StructuralError("mass-action system needs one generator, alpha, beta, lambda per species");
    }
    const Eigen::Index n = generators.front().rows();
    for (const auto& l : generators) {
        if (l.rows() != n || l.cols() != n) {
            throw StructuralError("all species generators must have the same size");
        }
    }
    OdeSystem sys;
    sys.dimension = q * static_cast<std::size_t>(n);
    sys.rhs = [generators = std::move(generators), alpha = std::move(alpha),
               beta = std::move(beta), lambda = std::move(lambda), q,
               n](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(y.size());
        for (Eigen::Index x = 0; x < n; ++x) {
            double fwd = 1.0;
            double bwd = 1.0;
            for (std::size_t i = 0; i < q; ++i) {
                const double v = y(static_cast<Eigen::Index>(i) * n + x);
                for (int p = 0; p < alpha[i]; ++p) fwd *= v;
                for (int p = 0; p < beta[i]; ++p) bwd *= v;
            }
            const double g = fwd - bwd;
            for (std::size_t i = 0; i < q; ++i) {
                dy(static_cast<Eigen::Index>(i) * n + x) = lambda[i] * (beta[i] - alpha[i]) * g;
            }
        }
        for (std::size_t i = 0; i < q; ++i) {
            const auto off = static_cast<Eigen::Index>(i) * n;
            dy.segment(off, n) += generators[i] * y.segment(off, n);
        }
    };
    return sys;
}

std::vector<Field> mass_action_reference(const std::vector<Eigen::MatrixXd>& generators,
                                         const std::vector<int>& alpha,
                                         const std::vector<int>& beta,
                                         const std::vector<double>& lambda,
                                         const std::vector<StateFunction>& f, const TimeGrid& grid,
                                         const OdeOptions& options) {
    const OdeSystem sys = mass_action_system(generators, alpha, beta, lambda);
    const std::size_t q = generators.size();
    if (f.size() != q) {
        throw StructuralError("one initial datum per species is required");
    }
    const Eigen::Index n = generators.front().rows();
    Eigen::VectorXd y0(static_cast<Eigen::Index>(sys.dimension));
    for (std::size_t i = 0; i < q; ++i) {
        if (f[i].size() != n) {
            throw StructuralError("initial datum has the wrong length");
        }
        y0.segment(static_cast<Eigen::Index>(i) * n, n) = f[i];
    }
    const OdeResult res = integrate_reference(sys, y0, grid, options);
    std::vector<Field> out;
    for (std::size_t i = 0; i < q; ++i) {
        out.emplace_back(grid, res.samples.middleRows(static_cast<Eigen::Index>(i) * n, n));
    }
    return out;
}

Field cornerstone_reference(const Eigen::MatrixXd& generator, const Field& a, const Field& b,
                            const StateFunction& f, const OdeOptions& options) {
    if (!(a.grid() == b.grid())) {
        throw StructuralError("A and B must share a grid");
    }
    OdeSystem sys;
    sys.dimension = static_cast<std::size_t>(f.size());
    sys.rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy = generator * y - a.at(t).cwiseProduct(y) + b.at(t);
    };
    // A and B have kinks at the grid nodes: integrate node to node
    const TimeGrid& grid = a.grid();
    Field out(grid, static_cast<std::size_t>(f.size()));
    out.set_slice(0, f);
    Eigen::VectorXd y = f;
    for (int k = 0; k < grid.steps(); ++k) {
        const double t0 = grid.time(k);
        const double h = grid.time(k + 1) - t0;
        OdeSystem shifted{sys.dimension, [&, t0](double s, const Eigen::VectorXd& z,
                                                 Eigen::VectorXd& dz) { sys.rhs(t0 + s, z, dz); }};
        const OdeResult r = integrate_reference(shifted, y, TimeGrid(h, 1), options);
        y = r.samples.col(1);
        out.set_slice(k + 1, y);
    }
    return out;
}

namespace {

// plain mu(v Lu) style evaluations from the dense matrix
double naive_energy(const Eigen::MatrixXd& l, const Eigen::VectorXd& mu, const Eigen::VectorXd& u) {
    return -mu.dot(u.cwiseProduct(l * u));
}

double naive_entropy(const Eigen::VectorXd& mu, const Eigen::VectorXd& f) {
    double m = mu.dot(f);
    double acc = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        if (f(x) > 0.0) acc += mu(x) * f(x) * std::log(f(x));
    }
    return acc - m * std::log(m);
}

bool connected(const Eigen::MatrixXd& l) {
    const Eigen::Index n = l.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const Eigen::Index x = stack.back();
        stack.pop_back();
        for (Eigen::Index y = 0; y < n; ++y) {
            if (y != x && l(x, y) > 0.0 && !seen[static_cast<std::size_t>(y)]) {
                seen[static_cast<std::size_t>(y)] = true;
                stack.push_back(y);
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

template <class Objective>
double pattern_search(Eigen::VectorXd& u, const Objective& obj, double step, int iters) {
    double best = obj(u);
    for (int it = 0; it < iters && step > 1e-10; ++it) {
        bool improved = false;
        for (Eigen::Index x = 0; x < u.size(); ++x) {
            for (double sgn : {1.0, -1.0}) {
                Eigen::VectorXd cand = u;
                cand(x) += sgn * step;
                const double v = obj(cand);
                if (v > best) {
                    best = v;
                    u = cand;
                    improved = true;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
        }
    }
    return best;
}

}  // namespace

LsiEstimate maximize_lsi_ratio(const Generator& gen, int restarts, int iters, std::uint64_t seed) {
    const Eigen::MatrixXd& l = gen.matrix();
    const Eigen::VectorXd& mu = gen.space().weights();
    const Eigen::Index n = l.rows();
    if (n < 2 || !connected(l)) {
        throw DomainError("generator is reducible; the LSI constant is infinite");
    }

    // ratio on the unit sphere; near-constant candidates are left to the limit branch
    auto ratio = [&](const Eigen::VectorXd& u) {
        const Eigen::VectorXd sq = u.cwiseAbs2();
        const double m = mu.dot(sq);
        const double var = mu.dot((sq.array() - m).square().matrix());
        if (!(m > 0.0) || var < 1e-6 * m * m) {
            return 0.0;
        }
        const Eigen::VectorXd w = u / std::sqrt(m);
        const double e = naive_energy(l, mu, w);
        return e > 0.0 ? naive_entropy(mu, w.cwiseAbs2()) / e : 0.0;
    };
    // 2 mu(v^2) / E(v) over mean-zero v
    auto limit = [&](const Eigen::VectorXd& v) {
        const Eigen::VectorXd c = v.array() - mu.dot(v);
        const double e = naive_energy(l, mu, c);
        return e > 0.0 ? 2.0 * mu.dot(c.cwiseAbs2()) / e : 0.0;
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // random search: uniform, log-normal and near-constant candidates
    std::vector<std::pair<double, Eigen::VectorXd>> pool;
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd u(n);
        switch (r % 3) {
            case 0:
                for (Eigen::Index x = 0; x < n; ++x) u(x) = unit(rng);
                break;
            case 1: {
                const double spread = 0.5 + 3.0 * unit(rng);
                for (Eigen::Index x = 0; x < n; ++x) u(x) = std::exp(spread * normal(rng));
                break;
            }
            default: {
                const double s = std::exp(std::log(1e-2) + unit(rng) * std::log(1e2));
                for (Eigen::Index x = 0; x < n; ++x) u(x) = 1.0 + s * normal(rng);
            }
        }
        pool.emplace_back(ratio(u), u);
    }
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // polish the best few in log coordinates u = exp(w)
    LsiEstimate best;
    best.restarts = restarts;
    auto log_ratio = [&](const Eigen::VectorXd& w) { return ratio(w.array().exp().matrix()); };
    const std::size_t keep = std::min<std::size_t>(pool.size(), 8);
    for (std::size_t c = 0; c < keep; ++c) {
        if (!(pool[c].first > 0.0)) continue;
        Eigen::VectorXd w = pool[c].second.cwiseAbs().cwiseMax(1e-12).array().log().matrix();
        const double v = pattern_search(w, log_ratio, 0.5, iters);
        if (v > best.constant) {
            best.constant = v;
            best.witness = w.array().exp().matrix();
        }
    }

    // limit branch
    Eigen::VectorXd v(n);
    double lim = 0.0;
    for (int r = 0; r < std::max(1, restarts / 10); ++r) {
        Eigen::VectorXd cand(n);
        for (Eigen::Index x = 0; x < n; ++x) cand(x) = normal(rng);
        cand = cand.array() - mu.dot(cand);
        cand /= std::sqrt(mu.dot(cand.cwiseAbs2()));
        const double val = limit(cand);
        if (val > lim) {
            lim = val;
            v = cand;
        }
    }
    lim = pattern_search(v, limit, 0.1, iters);
    if (lim > best.constant) {
        best.constant = lim;
        v = v.array() - mu.dot(v);
        best.witness = Eigen::VectorXd::Ones(n) + 1e-7 * v / std::sqrt(mu.dot(v.cwiseAbs2()));
    }
    return best;
}

}  // namespace rdkin
