#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace texforge::cli {

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitFile = 1;      // unreadable or malformed input files
inline constexpr int kExitUsage = 2;     // unknown flags, bad values
inline constexpr int kExitRuntime = 3;   // solver or model failures

/// Runs the command line `args` (args[0] is the program name).  Errors are
/// written to `err` as one JSON object per line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace texforge::cli
