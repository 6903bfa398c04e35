#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svytree {

/// Exit statuses of the command-line driver.
enum ExitStatus : int {
  kExitOk = 0,
  kExitComputation = 1,
  kExitBadArguments = 2,
  kExitConfig = 3,
};

/// Runs `svytree <subcommand> ...`. `args` excludes the program name.
/// Failures print one JSON line {"error", "module", "message"} to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace svytree
