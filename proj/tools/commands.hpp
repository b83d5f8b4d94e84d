#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowcast::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kInput = 3,
    kNumeric = 4,
    kIo = 5,
    kInternal = 70,
};

/// Runs the `flowcast` command line. `args` excludes the program name.
/// Normal output goes to `out`; warnings and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace flowcast::cli
