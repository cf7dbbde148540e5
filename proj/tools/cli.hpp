#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace domino::cli {

enum ExitCode : int {
    EXIT_OK = 0,
    EXIT_INPUT = 1,     // unreadable or invalid input, usage errors
    EXIT_SPEC = 2,      // chain spec errors
    EXIT_INTERNAL = 3,
};

/// Runs one command line (without the program name). Regular output goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace domino::cli
