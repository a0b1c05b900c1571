#include "scenario.hpp"

#include "rdkin/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace rdkin::cli {

namespace {

class Reader {
public:
    explicit Reader(std::string name) : name_(std::move(name)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
        fail_at(node.Mark(), msg);
    }

    [[noreturn]] void fail_at(const YAML::Mark& mark, const std::string& msg) const {
        std::ostringstream os;
        os << name_;
        if (mark.line >= 0) os << ":" << mark.line + 1 << ":" << mark.column + 1;
        os << ": " << msg;
        throw ScenarioError(os.str());
    }

    void expect_map(const YAML::Node& node, const std::string& what) const {
        if (!node.IsMap()) fail(node, what + " must be a mapping");
    }

    void allow(const YAML::Node& node, std::initializer_list<const char*> keys,
               const std::string& where) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::BadConversion&) {
            fail(node, "cannot read " + what + " from '" + node.Scalar() + "'");
        }
    }

    template <class T>
    std::vector<T> list(const YAML::Node& node, const std::string& what) const {
        if (!node.IsSequence()) fail(node, what + " must be a list");
        std::vector<T> out;
        for (std::size_t i = 0; i < node.size(); ++i)
            out.push_back(scalar<T>(node[i], what + "[" + std::to_string(i) + "]"));
        return out;
    }

    /// `auto` or a number.
    std::optional<double> maybe_auto(const YAML::Node& node, const std::string& what) const {
        if (node.IsScalar() && node.Scalar() == "auto") return std::nullopt;
        return scalar<double>(node, what);
    }

private:
    std::string name_;
};

GeneratorSpec read_generator(const Reader& r, const YAML::Node& node) {
    r.expect_map(node, "generator");
    r.allow(node, {"kind", "size", "rate", "weights", "matrix"}, "generator");
    GeneratorSpec g;
    if (!node["kind"]) r.fail(node, "generator.kind is required");
    g.kind = r.scalar<std::string>(node["kind"], "generator.kind");
    if (node["size"]) g.size = r.scalar<std::size_t>(node["size"], "generator.size");
    if (node["rate"]) g.rate = r.scalar<double>(node["rate"], "generator.rate");
    if (node["weights"]) g.weights = r.list<double>(node["weights"], "generator.weights");
    if (node["matrix"]) {
        const auto m = node["matrix"];
        if (!m.IsSequence()) r.fail(m, "generator.matrix must be a list of rows");
        for (std::size_t i = 0; i < m.size(); ++i)
            g.matrix.push_back(r.list<double>(m[i], "generator.matrix row"));
    }
    if (g.kind == "ring") {
        if (g.size < 3) r.fail(node, "ring generator needs size >= 3");
    } else if (g.kind == "birth_death") {
        if (g.weights.size() < 2) r.fail(node, "birth_death generator needs at least 2 weights");
    } else if (g.kind == "explicit") {
        if (g.matrix.empty()) r.fail(node, "explicit generator needs a matrix");
        for (const auto& row : g.matrix)
            if (row.size() != g.matrix.size()) r.fail(node["matrix"], "matrix must be square");
        if (!g.weights.empty() && g.weights.size() != g.matrix.size())
            r.fail(node["weights"], "weights must match the matrix size");
    } else {
        r.fail(node["kind"], "generator.kind must be ring, birth_death or explicit");
    }
    return g;
}

InitialProfile read_profile(const Reader& r, const YAML::Node& node, std::size_t i) {
    const std::string what = "initial[" + std::to_string(i) + "]";
    InitialProfile p;
    if (node.IsSequence()) {
        p.profile = "values";
        p.values = r.list<double>(node, what);
        return p;
    }
    if (node.IsScalar()) {
        p.value = r.scalar<double>(node, what);
        return p;
    }
    r.expect_map(node, what);
    r.allow(node, {"profile", "value", "values", "center", "width", "height", "base", "low", "high"},
            what);
    if (!node["profile"]) r.fail(node, what + ".profile is required");
    p.profile = r.scalar<std::string>(node["profile"], what + ".profile");
    auto num = [&](const char* key, double& out) {
        if (node[key]) out = r.scalar<double>(node[key], what + "." + key);
    };
    num("value", p.value);
    num("center", p.center);
    num("width", p.width);
    num("height", p.height);
    num("base", p.base);
    num("low", p.low);
    num("high", p.high);
    if (node["values"]) p.values = r.list<double>(node["values"], what + ".values");
    if (p.profile == "values" && p.values.empty()) r.fail(node, what + " needs values");
    if (p.profile == "bump" && !(p.width > 0)) r.fail(node, what + ".width must be > 0");
    if (p.profile == "random" && !(p.high >= p.low)) r.fail(node, what + " needs high >= low");
    if (p.profile != "constant" && p.profile != "bump" && p.profile != "random" &&
        p.profile != "values")
        r.fail(node["profile"], "profile must be constant, bump, random or values");
    return p;
}

Scenario read(const YAML::Node& root, const Reader& r) {
    r.expect_map(root, "scenario");
    r.allow(root, {"seed", "generator", "problem", "initial", "grid", "gamma", "intervals", "verify",
                   "golden"},
            "scenario");
    Scenario s;
    if (root["seed"]) s.seed = r.scalar<std::uint64_t>(root["seed"], "seed");

    if (!root["generator"]) r.fail(root, "missing 'generator'");
    s.generator = read_generator(r, root["generator"]);

    if (!root["problem"]) r.fail(root, "missing 'problem'");
    const auto pb = root["problem"];
    r.expect_map(pb, "problem");
    r.allow(pb, {"kind", "c1", "c2", "lambda", "alpha", "beta", "rates", "blocks",
                 "block_coefficients"},
            "problem");
    if (pb["kind"]) s.kind = r.scalar<std::string>(pb["kind"], "problem.kind");
    if (s.kind == "two_by_two") {
        for (const char* k : {"alpha", "beta", "rates", "blocks", "block_coefficients"})
            if (pb[k]) r.fail(pb[k], std::string("'") + k + "' only applies to general problems");
        if (pb["c1"]) s.c1 = r.scalar<double>(pb["c1"], "problem.c1");
        if (pb["c2"]) s.c2 = r.scalar<double>(pb["c2"], "problem.c2");
        if (pb["lambda"]) s.lambda = r.scalar<double>(pb["lambda"], "problem.lambda");
        if (!(s.c1 > 0) || !(s.c2 > 0)) r.fail(pb, "c1 and c2 must be > 0");
        if (!(s.lambda >= 0)) r.fail(pb, "lambda must be >= 0");
    } else if (s.kind == "general") {
        for (const char* k : {"c1", "c2"})
            if (pb[k]) r.fail(pb[k], std::string("'") + k + "' only applies to two_by_two problems");
        if (!pb["alpha"] || !pb["beta"]) r.fail(pb, "general problems need alpha and beta");
        s.alpha = r.list<int>(pb["alpha"], "problem.alpha");
        s.beta = r.list<int>(pb["beta"], "problem.beta");
        if (s.alpha.size() != s.beta.size()) r.fail(pb["beta"], "alpha and beta lengths differ");
        const std::size_t q = s.alpha.size();
        if (pb["rates"]) {
            s.rates = r.list<double>(pb["rates"], "problem.rates");
            if (s.rates.size() != q) r.fail(pb["rates"], "rates must have one entry per species");
        } else if (pb["lambda"]) {
            s.rates.assign(q, r.scalar<double>(pb["lambda"], "problem.lambda"));
        } else {
            r.fail(pb, "general problems need rates or lambda");
        }
        s.blocks = pb["blocks"] ? r.list<int>(pb["blocks"], "problem.blocks")
                                : std::vector<int>(q, 0);
        if (s.blocks.size() != q) r.fail(pb["blocks"], "blocks must have one entry per species");
        int nb = 0;
        for (int b : s.blocks) {
            if (b < 0) r.fail(pb["blocks"], "block indices must be >= 0");
            nb = std::max(nb, b + 1);
        }
        s.block_coefficients = pb["block_coefficients"]
                                   ? r.list<double>(pb["block_coefficients"],
                                                    "problem.block_coefficients")
                                   : std::vector<double>(static_cast<std::size_t>(nb), 1.0);
        if (s.block_coefficients.size() != static_cast<std::size_t>(nb))
            r.fail(pb["block_coefficients"], "need one coefficient per block");
        for (double c : s.block_coefficients)
            if (!(c > 0)) r.fail(pb["block_coefficients"], "block coefficients must be > 0");
    } else {
        r.fail(pb["kind"], "problem.kind must be two_by_two or general");
    }

    if (!root["initial"]) r.fail(root, "missing 'initial'");
    const auto init = root["initial"];
    if (!init.IsSequence()) r.fail(init, "initial must be a list with one entry per species");
    for (std::size_t i = 0; i < init.size(); ++i) s.initial.push_back(read_profile(r, init[i], i));
    if (s.initial.size() != s.species())
        r.fail(init, "initial has " + std::to_string(s.initial.size()) + " entries, expected " +
                         std::to_string(s.species()));

    if (root["grid"]) {
        const auto g = root["grid"];
        r.expect_map(g, "grid");
        r.allow(g, {"t_end", "steps", "dt"}, "grid");
        if (g["t_end"]) s.grid.t_end = r.maybe_auto(g["t_end"], "grid.t_end");
        if (g["steps"] && g["dt"]) r.fail(g, "give either grid.steps or grid.dt");
        if (g["steps"]) {
            s.grid.steps = r.scalar<int>(g["steps"], "grid.steps");
            if (*s.grid.steps < 1) r.fail(g["steps"], "grid.steps must be >= 1");
        }
        if (g["dt"]) s.grid.dt = r.scalar<double>(g["dt"], "grid.dt");
        if (!(s.grid.dt > 0)) r.fail(g, "grid.dt must be > 0");
        if (s.grid.t_end && !(*s.grid.t_end > 0)) r.fail(g["t_end"], "grid.t_end must be > 0");
    }
    if (s.kind == "general" && !s.grid.t_end)
        r.fail(root["grid"] ? root["grid"] : root, "general problems need a numeric grid.t_end");

    if (root["gamma"]) {
        s.gamma = r.maybe_auto(root["gamma"], "gamma");
        if (s.gamma && !(*s.gamma > 0)) r.fail(root["gamma"], "gamma must be > 0");
    }
    if (root["intervals"]) {
        s.intervals = r.scalar<int>(root["intervals"], "intervals");
        if (s.intervals < 1) r.fail(root["intervals"], "intervals must be >= 1");
        if (s.intervals > 1 && s.kind != "two_by_two")
            r.fail(root["intervals"], "interval chaining is only available for two_by_two");
    }
    if (root["verify"]) {
        const auto v = root["verify"];
        r.expect_map(v, "verify");
        r.allow(v, {"mode", "oracle_tolerance"}, "verify");
        if (v["mode"]) s.verify_mode = r.scalar<std::string>(v["mode"], "verify.mode");
        if (s.verify_mode != "fast" && s.verify_mode != "oracle")
            r.fail(v["mode"], "verify.mode must be fast or oracle");
        if (v["oracle_tolerance"])
            s.oracle_tolerance = r.scalar<double>(v["oracle_tolerance"], "verify.oracle_tolerance");
    } else if (s.kind == "general") {
        s.oracle_tolerance = 1e-4;
    }
    if (root["golden"]) {
        const auto g = root["golden"];
        r.expect_map(g, "golden");
        r.allow(g, {"csv", "tolerance"}, "golden");
        if (g["csv"]) s.golden_csv = r.scalar<std::string>(g["csv"], "golden.csv");
        if (g["tolerance"]) s.golden_tolerance = r.scalar<double>(g["tolerance"], "golden.tolerance");
    }
    return s;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& name) {
    Reader r(name);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        r.fail_at(e.mark, e.msg);
    }
    Scenario s = read(root, r);
    s.path = name;
    return s;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path + ": cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str(), path);
}

Generator build_generator(const GeneratorSpec& spec) {
    if (spec.kind == "ring") return Generator::ring(spec.size, spec.rate);
    if (spec.kind == "birth_death") {
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(spec.weights.data(),
                                                              static_cast<Eigen::Index>(spec.weights.size()));
        return Generator::birth_death(w, spec.rate);
    }
    const auto n = static_cast<Eigen::Index>(spec.matrix.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = spec.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (spec.weights.empty()) return Generator(FiniteMeasureSpace::uniform(spec.matrix.size()), m);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(spec.weights.data(), n);
    return Generator(FiniteMeasureSpace(w / w.sum()), m);
}

std::vector<StateFunction> build_initial(const Scenario& s, std::size_t states) {
    std::mt19937_64 rng(s.seed);
    const auto n = static_cast<Eigen::Index>(states);
    std::vector<StateFunction> out;
    for (std::size_t i = 0; i < s.initial.size(); ++i) {
        const auto& p = s.initial[i];
        StateFunction f(n);
        if (p.profile == "constant") {
            f.setConstant(p.value);
        } else if (p.profile == "bump") {
            for (Eigen::Index x = 0; x < n; ++x) {
                const double d = (static_cast<double>(x) - p.center) / p.width;
                f(x) = p.base + p.height * std::exp(-0.5 * d * d);
            }
        } else if (p.profile == "random") {
            std::uniform_real_distribution<double> u(p.low, p.high);
            for (Eigen::Index x = 0; x < n; ++x) f(x) = u(rng);
        } else {
            if (p.values.size() != states)
                throw ScenarioError(s.path + ": initial[" + std::to_string(i) + "] has " +
                                    std::to_string(p.values.size()) + " values for " +
                                    std::to_string(states) + " states");
            for (Eigen::Index x = 0; x < n; ++x) f(x) = p.values[static_cast<std::size_t>(x)];
        }
        out.push_back(f);
    }
    return out;
}

TwoByTwoProblem build_two_by_two(const Scenario& s) {
    Generator gen = build_generator(s.generator);
    auto f = build_initial(s, gen.size());
    TwoByTwoProblem p{gen, s.c1, s.c2, s.lambda, {f[0], f[1], f[2], f[3]}};
    p.validate();
    return p;
}

GeneralProblem build_general(const Scenario& s) {
    Generator base = build_generator(s.generator);
    ReactionSpec spec;
    spec.alpha = s.alpha;
    spec.beta = s.beta;
    spec.lambda = s.rates;
    spec.block = s.blocks;
    for (double c : s.block_coefficients) spec.generators.push_back(base.scaled(c));
    GeneralProblem p{spec, build_initial(s, base.size())};
    p.validate();
    return p;
}

}  // namespace rdkin::cli
