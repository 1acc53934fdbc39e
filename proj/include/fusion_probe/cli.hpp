#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fusion_probe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name). Diagnostics
/// go to `err` as a single line; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from --threads, else FUSION_PROBE_THREADS, else hardware.
unsigned resolve_threads(int flag_value);

}  // namespace fusion_probe::cli
