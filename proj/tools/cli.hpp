#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace muse::tools {

enum ExitCode : int { kOk = 0, kConfigExit = 2, kDatasetExit = 3, kNumericExit = 4 };

/// Runs one `muse` invocation. args excludes the program name.
/// Reports go to --out when given, otherwise to `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace muse::tools
