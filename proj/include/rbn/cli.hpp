#pragma once

namespace rbn {

// Subcommand dispatcher for the rbn tool: solve-grid, train, calibrate,
// rollout-eval, compare-sets, simulate. Returns the process exit status
// (0 success, 1 runtime/I-O failure, 2 usage error).
int run_cli(int argc, const char* const* argv);

}  // namespace rbn
