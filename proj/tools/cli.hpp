#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hsc::cli {

inline constexpr const char* kToolVersion = "0.3.1";

// Runs one subcommand; `args` excludes the program name. Returns the process
// exit code: 0 success, 1 invalid input, 2 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);

}  // namespace hsc::cli
