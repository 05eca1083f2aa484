#pragma once

#include <string>
#include <vector>

namespace cranial::cli {

/// Exit codes of the command-line tool.
enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Parses and executes one subcommand; never throws. Diagnostics go to
/// stderr as a single line.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace cranial::cli
