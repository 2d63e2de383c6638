#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rmdp {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kSolver = 3 };

/**
 * Runs one command line (without the program name). Reports go to `out`,
 * diagnostics and log lines to `err`.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rmdp
