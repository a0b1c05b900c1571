#pragma once

#include "scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rdkin::cli {

enum ExitCode : int { kPass = 0, kError = 1, kVerificationFailed = 2 };

struct Options {
    std::string out;     ///< output directory (run, sweep) or file (golden)
    std::string verify;  ///< "", "fast" or "oracle"; empty means the scenario's choice
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::string golden;  ///< golden CSV overriding the scenario's
};

struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool upper = true;  ///< value <= limit when true, value >= limit otherwise
    bool pass = true;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string checksum_hex(std::string_view bytes);

/// `t,species,state,value` rows, time-major, species 1-based, states 0-based.
std::string trajectory_csv(const Species& u);

int cmd_run(const std::string& scenario, const Options& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& scenario, const Options& opts, std::ostream& out,
               std::ostream& err);
int cmd_sweep(const std::string& scenario, const std::string& param,
              const std::vector<double>& values, const Options& opts, std::ostream& out,
              std::ostream& err);
/// Oracle trajectory for the scenario grid plus a `.sum` sidecar.
int cmd_golden(const std::string& scenario, const Options& opts, std::ostream& out,
               std::ostream& err);

}  // namespace rdkin::cli
