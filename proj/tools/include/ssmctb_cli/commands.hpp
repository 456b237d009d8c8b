#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssmctb::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kValidation = 2, kNumerical = 3 };

/// Runs one CLI invocation. `args` excludes the program name. JSON reports go
/// to `out`; usage text and errors go to `err`; logging goes to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssmctb::cli
