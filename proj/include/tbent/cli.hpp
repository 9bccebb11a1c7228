#pragma once

#include <iosfwd>

namespace tbent {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNotConverged = 4,
};

/// Entry point of the `tbent` tool: simulate, analyze, fringe, tomo, report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tbent
