#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qkd::cli {

// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;       // bad command line
inline constexpr int kExitParse = 3;       // malformed input file
inline constexpr int kExitValidation = 4;  // values violate invariants, unusable data
inline constexpr int kExitRuntime = 5;     // anything else

// Runs one command. `args` excludes the program name. Primary output goes to
// --out when given (with the summary on `out`), otherwise to `out` (with the
// summary on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qkd::cli
