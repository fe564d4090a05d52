#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace lsc::cli {

/// Stable process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitAllInfeasible = 3,
    kExitNumeric = 4,
    kExitVerification = 5,
};

int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_extract(const RunConfig& cfg, std::ostream& out);
int cmd_verify(const RunConfig& cfg, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out);

/// Parses `args` (without the program name), dispatches to a subcommand and
/// maps every error to its exit code. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lsc::cli
