#pragma once

#include <iosfwd>

namespace evmpc {

enum ExitCode : int {
  kExitOk = 0,
  kExitInvalid = 1,
  kExitNotConverged = 2,
  kExitIo = 3,
};

/// Entry point of the `evmpc` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evmpc
