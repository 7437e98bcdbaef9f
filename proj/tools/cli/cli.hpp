#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gausshead::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name). Environment
/// variables with the GAUSSHEAD_ prefix are read through `getenv`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gausshead::cli
