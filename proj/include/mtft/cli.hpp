#pragma once

namespace mtft {

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 runtime
/// failure (one-line `error: ...` on stderr), 2 usage problems.
int run_cli(int argc, const char* const* argv);

}  // namespace mtft
