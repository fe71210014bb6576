#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fuselens::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kIoError = 3, kDiverged = 4 };

/// Runs the `fuselens` command line. `args` includes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fuselens::cli
