#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evosim {

inline constexpr const char* kOutDirEnv = "EVOSIM_OUT_DIR";

// Entry point behind the `evosim` binary; args exclude the program name.
// Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evosim
