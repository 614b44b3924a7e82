#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccopf::cli {

/// Exit codes of the ccopf command.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInfeasible = 2,
  kNoConvergence = 3,
  kCertificationFailed = 4,
};

/// Runs one command. args excludes the program name. The report goes to
/// out unless --out is given; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccopf::cli
