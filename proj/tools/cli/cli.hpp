#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stance::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kRuntimeError = 3,
};

/// Runs one subcommand. Machine output goes to `out` (or files under
/// --out-dir), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Parses a flat key=value config file body into (key, value) pairs.
/// Blank lines, lines starting with '#' or ';', and [section] headers are
/// ignored. Throws stance::ConfigError on a line without '='.
std::vector<std::pair<std::string, std::string>> parse_config(const std::string& text);

}  // namespace stance::cli
