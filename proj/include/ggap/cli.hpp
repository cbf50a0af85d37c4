#pragma once

// Command-line front end. Each cmd_* function implements one subcommand and
// returns a process exit code; run_cli parses argv and dispatches.
//
// Exit codes: 0 success, 2 config error, 3 numeric divergence, 4 integrity
// or other runtime error.

namespace ggap::cli {

int run_cli(int argc, const char* const* argv);

}  // namespace ggap::cli
