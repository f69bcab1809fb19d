#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmsim::cli {

/// Exit codes: all checks passed, checks ran and failed, usage or config error.
enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

/// Runs the command line `args` (without the program name). Reports go to
/// `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hmsim::cli
