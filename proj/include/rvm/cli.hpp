#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rvm {

enum ExitCode : int {
    kExitOk = 0,
    kExitThreshold = 1,  ///< a validation threshold was missed
    kExitUsage = 2,      ///< bad flags, config or input files
    kExitNumerical = 3,  ///< blow-up or non-convergence
};

/// Runs one subcommand. `args` excludes the program name, e.g. {"simulate", "--config", "a.cfg"}.
/// Results go to `out`, diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rvm
