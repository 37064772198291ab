#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace harmony::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Entry point of the `harmonize` tool. `args` excludes the program name.
/// Data goes to `out`, progress and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace harmony::cli
