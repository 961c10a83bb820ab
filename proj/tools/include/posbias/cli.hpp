#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posbias::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kEndpointFailure = 4,
};

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace posbias::cli
