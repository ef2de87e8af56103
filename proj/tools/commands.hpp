#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace glt::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kIo = 2,
    kNumerical = 3,
};

// Runs the command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace glt::cli
