#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pooltest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Runs gtplan with `args` (without the program name). Data goes to `out`, warnings and
// errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pooltest::cli
