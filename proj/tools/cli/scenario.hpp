#pragma once

#include "rdkin/markov_generator.hpp"
#include "rdkin/rdp_general.hpp"
#include "rdkin/rdp_two_by_two.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rdkin::cli {

/// Bad scenario file; the message carries file:line:column when known.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GeneratorSpec {
    std::string kind = "ring";  // ring | birth_death | explicit
    std::size_t size = 0;
    double rate = 1.0;
    std::vector<double> weights;
    std::vector<std::vector<double>> matrix;
};

struct InitialProfile {
    std::string profile = "constant";  // constant | bump | random | values
    double value = 0.0;
    double center = 0.0;  // bump: base + height * exp(-(x - center)^2 / (2 width^2))
    double width = 1.0;
    double height = 1.0;
    double base = 0.0;
    double low = 0.0;
    double high = 1.0;
    std::vector<double> values;
};

struct GridSpec {
    std::optional<double> t_end;  // nullopt: auto
    std::optional<int> steps;
    double dt = 1e-3;
};

struct Scenario {
    std::string path;
    std::uint64_t seed = 0;
    GeneratorSpec generator;

    std::string kind = "two_by_two";  // two_by_two | general
    double c1 = 1.0;
    double c2 = 1.0;
    double lambda = 0.0;
    std::vector<int> alpha;
    std::vector<int> beta;
    std::vector<double> rates;
    std::vector<int> blocks;
    std::vector<double> block_coefficients;

    std::vector<InitialProfile> initial;
    GridSpec grid;
    std::optional<double> gamma;  // nullopt: auto
    int intervals = 1;

    std::string verify_mode = "fast";  // fast | oracle
    double oracle_tolerance = 1e-5;
    std::string golden_csv;  // relative to the scenario file
    double golden_tolerance = 1e-5;

    std::size_t species() const { return kind == "two_by_two" ? 4 : alpha.size(); }
};

Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& name = "<string>");

Generator build_generator(const GeneratorSpec& spec);

/// Initial data drawn in species order from one generator seeded with the scenario seed.
std::vector<StateFunction> build_initial(const Scenario& s, std::size_t states);

TwoByTwoProblem build_two_by_two(const Scenario& s);
GeneralProblem build_general(const Scenario& s);

}  // namespace rdkin::cli
