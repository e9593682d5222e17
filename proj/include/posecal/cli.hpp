#pragma once

#include <iosfwd>

namespace posecal {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // unidentifiable, infeasible, I/O
inline constexpr int kExitUsage = 2;    // bad arguments or configuration

// Entry point of the `posecal` executable, with injectable streams for tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace posecal
