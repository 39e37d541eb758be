#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fmtpff {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitRuntime = 3 };

/// Entry point of the `fmtpff` command: gen-data, train, plan, benchmark,
/// plot. Settings come from flags and an optional JSON file given with
/// --config; flags win over the file and unknown file keys are rejected.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fmtpff
