#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pad::cli {

enum ExitStatus : int { kSuccess = 0, kInputError = 1, kInternalError = 2 };

/// Runs the padeval command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pad::cli
