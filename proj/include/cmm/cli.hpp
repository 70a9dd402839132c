#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmm {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

// Entry point of the `cmm` tool. `args` excludes the program name. On
// failure exactly one line "error: <usage|data|numerical>: <message>" goes
// to `err` and the matching exit code is returned.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmm
