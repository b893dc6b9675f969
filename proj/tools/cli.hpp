#pragma once

#include <iosfwd>

namespace eqrc::cli {

// Exit codes: 0 success (inequality commands report violation in their
// output, not their exit status), 1 usage error, 2 runtime error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eqrc::cli
