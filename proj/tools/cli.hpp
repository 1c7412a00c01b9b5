#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bvctl::cli {

// exit codes
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;  // a stage did not converge or an invariant broke
inline constexpr int kUsage = 2;   // bad arguments, config, missing or mismatched inputs

/// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bvctl::cli
