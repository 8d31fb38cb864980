#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ovseg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Entry point of the ovseg tool. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace ovseg::cli
