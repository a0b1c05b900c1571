#include "commands.hpp"

#include "rdkin/errors.hpp"
#include "rdkin/oracle.hpp"
#include "rdkin/orlicz.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace rdkin::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kLsiRestarts = 16;

double lsi_constant(const Generator& gen) {
    return estimate_lsi_constant(gen, kLsiRestarts, 1e-12).constant;
}

Scenario load(const std::string& path, const Options& opts) {
    Scenario s = parse_scenario(path);
    if (opts.seed) s.seed = *opts.seed;
    return s;
}

bool want_oracle(const Scenario& s, const Options& opts, bool dflt) {
    if (opts.verify == "oracle") return true;
    if (opts.verify == "fast") return false;
    return dflt || s.verify_mode == "oracle";
}

Check upper(std::string name, double value, double limit) {
    return {std::move(name), value, limit, true, value <= limit};
}

Check lower(std::string name, double value, double limit) {
    return {std::move(name), value, limit, false, value >= limit};
}

struct TbtSetup {
    TwoByTwoProblem problem;
    double c_ls = 0.0;
    double gamma = 0.0;
    double t_step = 0.0;
    int intervals = 1;
    int steps = 1;

    TimeGrid grid() const { return TimeGrid(t_step * intervals, steps); }
};

TbtSetup setup_two_by_two(const Scenario& s) {
    TwoByTwoProblem p = build_two_by_two(s);
    const double c = lsi_constant(p.gen);
    const double g = s.gamma ? *s.gamma : choose_gamma(p, c);
    const double t_step = s.grid.t_end ? *s.grid.t_end / s.intervals : auto_select_T(p, g, c);
    const double t_end = t_step * s.intervals;
    const int steps = s.grid.steps
                          ? *s.grid.steps
                          : std::max(1, static_cast<int>(std::lround(t_end / s.grid.dt)));
    if (steps % s.intervals != 0)
        throw ScenarioError(s.path + ": " + std::to_string(steps) +
                            " grid steps cannot be split over " + std::to_string(s.intervals) +
                            " intervals");
    return {p, c, g, t_step, s.intervals, steps};
}

json to_json(const IterationReport& r) {
    return json{{"sigma", r.sigma},
                {"sup_gaps", r.sup_gaps},
                {"ratios", r.ratios},
                {"eta_predicted", r.eta_predicted},
                {"eta_limit", r.eta_limit},
                {"eta_limit_text", r.eta_limit_text},
                {"eta_measured", r.eta_measured},
                {"D", r.D},
                {"D_alpha2", r.D_alpha2},
                {"M_gamma", r.M_gamma},
                {"gamma", r.gamma},
                {"kappa", r.kappa},
                {"c_ls", r.c_ls},
                {"t_end", r.t_end},
                {"conservation_residual", r.conservation_residual},
                {"positivity_min", r.positivity_min},
                {"moment_slack", r.moment_slack},
                {"uniform_bound_ratio", r.uniform_bound_ratio},
                {"n_converged", r.n_converged}};
}

json to_json(const GeneralReport& r) {
    return json{{"sigma", r.sigma},
                {"sup_gaps", r.sup_gaps},
                {"ratios", r.ratios},
                {"eta_measured", r.eta_measured},
                {"gamma", r.gamma},
                {"kappa", r.kappa},
                {"c_max", r.c_max},
                {"conservation_residual", r.conservation_residual},
                {"positivity_min", r.positivity_min},
                {"theta", r.theta},
                {"n_converged", r.n_converged}};
}

void report_checks(const std::vector<IterationReport>& reps, double lambda, std::vector<Check>& out) {
    double cons = 0.0, pos = std::numeric_limits<double>::infinity(), slack = pos, ubr = 0.0;
    double worst_excess = 0.0;  // eta_measured / eta_predicted
    bool any_ratio = false;
    for (const auto& r : reps) {
        cons = std::max(cons, r.conservation_residual);
        pos = std::min(pos, r.positivity_min);
        slack = std::min(slack, r.moment_slack);
        ubr = std::max(ubr, r.uniform_bound_ratio);
        if (!r.ratios.empty() && lambda > 0.0 && r.eta_predicted > 0.0) {
            any_ratio = true;
            worst_excess = std::max(worst_excess, r.eta_measured / r.eta_predicted);
        }
    }
    out.push_back(upper("conservation_residual", cons, 1e-9));
    out.push_back(lower("positivity_min", pos, -1e-10));
    out.push_back(lower("moment_slack", slack, -1e-8));
    if (any_ratio) out.push_back(upper("contraction_ratio_over_eta", worst_excess, 1.05));
    out.push_back(upper("uniform_bound_ratio", ubr, 1.0 + 1e-6));
}

std::vector<PolynomialTest> polynomial_tests(std::size_t species, std::size_t states) {
    std::vector<PolynomialTest> tests(species);
    for (std::size_t i = 0; i < species; ++i) {
        tests[i].coeffs = {1.0, 0.5, -0.3};
        tests[i].psi.resize(static_cast<Eigen::Index>(states));
        for (std::size_t x = 0; x < states; ++x)
            tests[i].psi(static_cast<Eigen::Index>(x)) =
                std::cos(2.0 * M_PI * static_cast<double>(x) / static_cast<double>(states) +
                         static_cast<double>(i));
    }
    return tests;
}

double tbt_weak_residual(const Species& u, const TwoByTwoProblem& p) {
    const auto t = polynomial_tests(4, p.gen.size());
    return weak_residual_rdp(u, p, {t[0], t[1], t[2], t[3]});
}

/// Orlicz, entropic and LSI checks shared by both problem kinds.
void battery(const std::vector<Generator>& species_gens, const std::vector<StateFunction>& f,
             const std::vector<std::pair<Generator, double>>& lsi, std::uint64_t seed,
             std::vector<Check>& out) {
    int jensen_bad = 0, entropic_bad = 0, lsi_bad = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (double alpha : {1.0, 2.0})
            for (double t : {0.1, 1.0, 10.0})
                if (!jensen_contraction_check(species_gens[i], f[i], YoungExp(alpha), t).holds(1e-8))
                    ++jensen_bad;
        if (f[i].maxCoeff() <= 0.0) continue;
        const auto& space = species_gens[i].space();
        for (std::size_t j = 0; j < f.size(); ++j)
            for (double g : {0.5, 1.0, 2.0})
                if (!entropic_bound(space, f[i], f[j], g).holds(1e-10)) ++entropic_bad;
    }
    std::mt19937_64 rng(seed ^ 0x15c0ffee);
    std::normal_distribution<double> normal;
    for (const auto& [gen, c] : lsi) {
        const auto n = static_cast<Eigen::Index>(gen.size());
        for (int k = 0; k < 1000; ++k) {
            StateFunction u(n);
            const double spread = k % 2 == 0 ? 1.0 : 1e-3;
            for (Eigen::Index x = 0; x < n; ++x) u(x) = 1.0 + spread * normal(rng);
            const double e = dirichlet_form(gen, u);
            if (!(entropy(gen.space(), u.cwiseProduct(u)) <= c * e * (1.0 + 1e-8))) ++lsi_bad;
        }
    }
    out.push_back(upper("jensen_violations", jensen_bad, 0));
    out.push_back(upper("entropic_violations", entropic_bad, 0));
    out.push_back(upper("lsi_violations", lsi_bad, 0));
}

struct Outcome {
    Species u;
    json report;
    std::vector<Check> checks;
};

double species_gap(const Species& a, const Species& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, sup_distance(a[i], b[i]));
    return gap;
}

Species tbt_oracle(const TwoByTwoProblem& p, const TimeGrid& grid) {
    const Eigen::MatrixXd l1 = p.c1 * p.gen.matrix(), l2 = p.c2 * p.gen.matrix();
    return mass_action_reference({l1, l2, l1, l2}, {1, 1, 0, 0}, {0, 0, 1, 1},
                                 std::vector<double>(4, p.lambda),
                                 {p.f[0], p.f[1], p.f[2], p.f[3]}, grid);
}

Species general_oracle(const GeneralProblem& p, const TimeGrid& grid) {
    std::vector<Eigen::MatrixXd> gens;
    for (std::size_t i = 0; i < p.spec.q(); ++i) gens.push_back(p.species_generator(i).matrix());
    return mass_action_reference(gens, p.spec.alpha, p.spec.beta, p.spec.lambda, p.f, grid);
}

Outcome solve_two_by_two(const Scenario& s, bool oracle, bool full) {
    const TbtSetup st = setup_two_by_two(s);
    const TwoByTwoProblem& p = st.problem;
    const TimeGrid grid = st.grid();
    Outcome o;
    o.report = {{"kind", "two_by_two"}, {"seed", s.seed},         {"c_ls", st.c_ls},
                {"gamma", st.gamma},    {"t_end", grid.t_end()},   {"steps", grid.steps()},
                {"intervals", st.intervals}};
    std::vector<IterationReport> reps;
    if (st.intervals == 1) {
        auto sol = iterate(p, grid, st.gamma, st.c_ls);
        o.u = std::move(sol.u);
        reps.push_back(sol.report);
        o.report["iteration"] = to_json(sol.report);
    } else {
        auto ch = chain_intervals(p, st.t_step, st.intervals, st.steps / st.intervals, st.gamma,
                                  st.c_ls);
        o.u = std::move(ch.u);
        reps = ch.reports;
        json arr = json::array();
        for (const auto& r : reps) arr.push_back(to_json(r));
        o.report["iteration"] = arr;
        o.report["seam_moment_slack"] = ch.seam_moment_slack;
        double seam = std::numeric_limits<double>::infinity();
        for (double v : ch.seam_moment_slack) seam = std::min(seam, v);
        if (!ch.seam_moment_slack.empty()) o.checks.push_back(lower("seam_moment_slack", seam, -1e-8));
    }
    report_checks(reps, p.lambda, o.checks);
    if (full) {
        std::vector<Generator> gens;
        for (int i = 0; i < 4; ++i) gens.push_back(p.species_generator(i));
        battery(gens, {p.f[0], p.f[1], p.f[2], p.f[3]}, {{p.gen, st.c_ls}}, s.seed, o.checks);
        const double wr = tbt_weak_residual(o.u, p);
        o.report["weak_residual"] = wr;
        // second-order defect: a generous constant times dt^2
        o.checks.push_back(upper("weak_residual", wr, std::max(1e-10, 10.0 * grid.dt() * grid.dt())));
    }
    if (oracle) {
        const double gap = species_gap(o.u, tbt_oracle(p, grid));
        o.report["oracle_gap"] = gap;
        o.checks.push_back(upper("oracle_gap", gap, s.oracle_tolerance));
    }
    return o;
}

Outcome solve_general(const Scenario& s, bool oracle, bool full) {
    const GeneralProblem p = build_general(s);
    std::vector<double> c_ls;
    for (const auto& g : p.spec.generators) c_ls.push_back(lsi_constant(g));
    const int steps = s.grid.steps ? *s.grid.steps
                                   : std::max(1, static_cast<int>(std::lround(*s.grid.t_end / s.grid.dt)));
    const TimeGrid grid(*s.grid.t_end, steps);
    auto sol = general_iterate(p, grid, c_ls);
    Outcome o;
    o.u = std::move(sol.u);
    o.report = {{"kind", "general"}, {"seed", s.seed},       {"block_c_ls", c_ls},
                {"t_end", grid.t_end()}, {"steps", grid.steps()}, {"iteration", to_json(sol.report)}};
    const auto& r = sol.report;
    o.checks.push_back(upper("conservation_residual", r.conservation_residual, 1e-9));
    o.checks.push_back(lower("positivity_min", r.positivity_min, -1e-10));
    if (!r.ratios.empty()) o.checks.push_back(upper("contraction_ratio", r.eta_measured, 1.0));
    if (full) {
        std::vector<Generator> gens;
        for (std::size_t i = 0; i < p.spec.q(); ++i) gens.push_back(p.species_generator(i));
        std::vector<std::pair<Generator, double>> lsi;
        for (std::size_t k = 0; k < c_ls.size(); ++k) lsi.emplace_back(p.spec.generators[k], c_ls[k]);
        battery(gens, p.f, lsi, s.seed, o.checks);
        const auto table = theta_and_membership(p.spec, p.f);
        double worst = 0.0;
        for (std::size_t i = 0; i < table.product_norm.size(); ++i)
            if (table.product_bound[i] > 0.0)
                worst = std::max(worst, table.product_norm[i] / table.product_bound[i]);
        o.report["theta"] = table.theta;
        o.report["moment_table"] = {{"gammas", table.gammas}, {"moments", table.moments}};
        o.checks.push_back(upper("product_norm_over_bound", worst, 1.0 + 1e-8));
    }
    if (oracle) {
        const double gap = species_gap(o.u, general_oracle(p, grid));
        o.report["oracle_gap"] = gap;
        o.checks.push_back(upper("oracle_gap", gap, s.oracle_tolerance));
    }
    return o;
}

Outcome solve(const Scenario& s, bool oracle, bool full) {
    return s.kind == "two_by_two" ? solve_two_by_two(s, oracle, full)
                                  : solve_general(s, oracle, full);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

/// Checksum, then sup gap against the golden trajectory.
void golden_checks(const Scenario& s, const Options& opts, Outcome& o, std::ostream& err) {
    fs::path csv = opts.golden;
    if (csv.empty()) {
        if (s.golden_csv.empty()) return;
        csv = fs::path(s.path).parent_path() / s.golden_csv;
    }
    const std::string text = read_file(csv);
    const fs::path sum = csv.string() + ".sum";
    if (!fs::exists(sum)) throw std::runtime_error("missing checksum file " + sum.string());
    const bool intact = trim(read_file(sum)) == checksum_hex(text);
    o.checks.push_back(upper("golden_checksum", intact ? 0.0 : 1.0, 0.0));
    if (!intact) {
        err << "checksum mismatch: " << csv.string() << "\n";
        return;
    }
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (trim(line) != "t,species,state,value") throw std::runtime_error(csv.string() + ": bad header");
    const std::size_t q = o.u.size();
    const std::size_t n = o.u.front().states();
    std::size_t row = 0;
    double gap = 0.0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        double t = 0, v = 0;
        int sp = 0, x = 0;
        if (std::sscanf(line.c_str(), "%lf,%d,%d,%lf", &t, &sp, &x, &v) != 4 || sp < 1 ||
            static_cast<std::size_t>(sp) > q || x < 0 || static_cast<std::size_t>(x) >= n)
            throw std::runtime_error(csv.string() + ": malformed row " + std::to_string(row + 2));
        const int k = static_cast<int>(row / (q * n));
        if (k > o.u.front().grid().steps())
            throw std::runtime_error(csv.string() + ": more rows than grid nodes");
        gap = std::max(gap, std::abs(v - o.u[static_cast<std::size_t>(sp - 1)].values()(x, k)));
        ++row;
    }
    const std::size_t expected = q * n * static_cast<std::size_t>(o.u.front().grid().steps() + 1);
    if (row != expected)
        throw std::runtime_error(csv.string() + ": " + std::to_string(row) + " rows, expected " +
                                 std::to_string(expected));
    o.report["golden_gap"] = gap;
    o.checks.push_back(upper("golden_gap", gap, s.golden_tolerance));
}

json checks_json(const std::vector<Check>& checks) {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"limit", c.limit},
                       {"relation", c.upper ? "<=" : ">="},
                       {"pass", c.pass}});
    return arr;
}

bool all_pass(const std::vector<Check>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

void print_table(const std::vector<Check>& checks, std::ostream& out) {
    out << "check\tvalue\tlimit\tresult\n";
    char buf[128];
    for (const auto& c : checks) {
        std::snprintf(buf, sizeof buf, "\t%.6g\t%s%.6g\t", c.value, c.upper ? "<=" : ">=", c.limit);
        out << c.name << buf << (c.pass ? "PASS" : "FAIL") << "\n";
    }
}

/// Runs `body`, mapping exceptions to exit code 1.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << "\n";
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << " (last gap " << e.last_gap() << ")\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kError;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string checksum_hex(std::string_view bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string trajectory_csv(const Species& u) {
    std::string out = "t,species,state,value\n";
    if (u.empty()) return out;
    const TimeGrid& grid = u.front().grid();
    char buf[96];
    for (int k = 0; k <= grid.steps(); ++k)
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t x = 0; x < u[i].states(); ++x) {
                std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu,%.17g\n", grid.time(k), i + 1, x,
                              u[i].values()(static_cast<Eigen::Index>(x), k));
                out += buf;
            }
    return out;
}

int cmd_run(const std::string& path, const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load(path, opts);
        Outcome o = solve(s, want_oracle(s, opts, false), false);
        golden_checks(s, opts, o, err);
        const fs::path dir = opts.out.empty() ? fs::path(".") : fs::path(opts.out);
        o.report["checks"] = checks_json(o.checks);
        write_file(dir / "trajectory.csv", trajectory_csv(o.u));
        write_file(dir / "report.json", o.report.dump(2) + "\n");
        const bool ok = all_pass(o.checks);
        if (!opts.quiet) {
            out << "wrote " << (dir / "trajectory.csv").string() << " and "
                << (dir / "report.json").string() << "\n";
            for (const auto& c : o.checks)
                if (!c.pass) out << "FAIL " << c.name << " = " << c.value << "\n";
            out << (ok ? "all checks passed" : "verification failed") << "\n";
        }
        return ok ? kPass : kVerificationFailed;
    });
}

int cmd_verify(const std::string& path, const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load(path, opts);
        Outcome o = solve(s, want_oracle(s, opts, true), true);
        golden_checks(s, opts, o, err);
        if (!opts.out.empty()) {
            o.report["checks"] = checks_json(o.checks);
            write_file(fs::path(opts.out) / "verify.json", o.report.dump(2) + "\n");
        }
        if (!opts.quiet) print_table(o.checks, out);
        return all_pass(o.checks) ? kPass : kVerificationFailed;
    });
}

int cmd_golden(const std::string& path, const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opts.out.empty()) throw std::runtime_error("golden needs --out <file.csv>");
        const Scenario s = load(path, opts);
        Species ref;
        if (s.kind == "two_by_two") {
            const TbtSetup st = setup_two_by_two(s);
            ref = tbt_oracle(st.problem, st.grid());
        } else {
            const GeneralProblem p = build_general(s);
            const int steps = s.grid.steps ? *s.grid.steps
                                           : std::max(1, static_cast<int>(std::lround(*s.grid.t_end / s.grid.dt)));
            ref = general_oracle(p, TimeGrid(*s.grid.t_end, steps));
        }
        const std::string text = trajectory_csv(ref);
        write_file(opts.out, text);
        write_file(opts.out + ".sum", checksum_hex(text) + "\n");
        if (!opts.quiet) out << "wrote " << opts.out << "\n";
        return kPass;
    });
}

int cmd_sweep(const std::string& path, const std::string& param, const std::vector<double>& values,
              const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load(path, opts);
        if (s.kind != "two_by_two") throw std::runtime_error("sweep supports two_by_two scenarios");
        if (s.intervals != 1) throw std::runtime_error("sweep runs a single interval");
        if (values.empty()) throw std::runtime_error("sweep needs --values");
        const TbtSetup st = setup_two_by_two(s);
        const TwoByTwoProblem& p = st.problem;
        const double T = st.t_step;
        std::ostringstream table;
        const double nan = std::numeric_limits<double>::quiet_NaN();

        if (param == "dt") {
            table << "dt,steps,weak_residual,order,eta_predicted,eta_measured,iterations\n";
            double prev_r = nan, prev_dt = nan;
            for (double dt : values) {
                if (!(dt > 0)) throw std::runtime_error("dt values must be > 0");
                const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
                auto sol = iterate(p, TimeGrid(T, steps), st.gamma, st.c_ls);
                const double r = tbt_weak_residual(sol.u, p);
                const double order = std::log(prev_r / r) / std::log(prev_dt / dt);
                table << fmt(dt) << "," << steps << "," << fmt(r) << "," << fmt(order) << ","
                      << fmt(sol.report.eta_predicted) << "," << fmt(sol.report.eta_measured) << ","
                      << sol.report.n_converged << "\n";
                prev_r = r;
                prev_dt = dt;
            }
        } else if (param == "epsilon") {
            // first linearized equation for u1, driven by the heat flows
            const TimeGrid grid = st.grid();
            const auto sums = paired_sums(p, grid);
            const auto heat = heat_flows(p, grid);
            Field a(grid, p.gen.size()), b(grid, p.gen.size());
            a.values() = p.lambda * sums[1].values();
            b.values() = p.lambda * sums[0].values().cwiseProduct(heat[3].values());
            const CornerstoneProblem cs{p.species_generator(0), a, b, p.f[0]};
            const Field direct = solve_cornerstone(cs);
            table << "epsilon,gap,order,iterations\n";
            double prev_g = nan, prev_e = nan;
            for (double eps : values) {
                const auto m = solve_mollified(cs, eps);
                const double g = sup_distance(m.u, direct);
                table << fmt(eps) << "," << fmt(g) << ","
                      << fmt(std::log(prev_g / g) / std::log(prev_e / eps)) << ","
                      << m.report.iterations << "\n";
                prev_g = g;
                prev_e = eps;
            }
        } else if (param == "lambda" || param == "gamma") {
            table << "lambda,gamma,D,eta_predicted,eta_measured,iterations,status\n";
            const TimeGrid grid = st.grid();
            for (double v : values) {
                TwoByTwoProblem q = p;
                double g = st.gamma;
                if (param == "lambda") {
                    q.lambda = v;
                    if (!s.gamma) g = choose_gamma(q, st.c_ls);
                } else {
                    g = v;
                }
                q.validate();
                if (!(g > 0)) throw std::runtime_error("gamma values must be > 0");
                const double D = constant_D(q, g);
                const double eta = eta_T(q.lambda, g, D, st.c_ls, T);
                table << fmt(q.lambda) << "," << fmt(g) << "," << fmt(D) << "," << fmt(eta) << ",";
                if (eta >= 1.0) {
                    table << ",,refused: eta(T) >= 1\n";
                    continue;
                }
                auto sol = iterate(q, grid, g, st.c_ls);
                table << fmt(sol.report.eta_measured) << "," << sol.report.n_converged << ",ok\n";
            }
        } else {
            throw std::runtime_error("unknown sweep parameter '" + param +
                                     "' (use dt, epsilon, lambda or gamma)");
        }
        if (!opts.out.empty()) write_file(fs::path(opts.out) / "sweep.csv", table.str());
        if (!opts.quiet) out << table.str();
        return kPass;
    });
}

}  // namespace rdkin::cli
