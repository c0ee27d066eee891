#pragma once

#include <ostream>

namespace skeval {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Entry point of the `skeval` tool. Subcommands: generate, classify,
// evaluate, simulate, validate-run, review.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace skeval
