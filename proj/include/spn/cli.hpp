#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand. args excludes the program name. Data goes to out only
// when the command succeeds; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace spn::cli
