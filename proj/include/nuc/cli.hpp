#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nuc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one subcommand (synth | stats | train | score | eval | ksweep).
/// args excludes the program name. Returns the process exit code:
/// 0 success, 1 usage, 2 data, 3 numeric.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nuc
