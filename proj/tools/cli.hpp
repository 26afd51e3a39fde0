#pragma once

#include <iosfwd>

namespace treat::cli {

/// Entry point of the `treat` command. Returns the process exit code:
/// 0 success, 1 failed verification, 2 config, 3 simulation, 4 training
/// divergence, 5 artifact mismatch.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace treat::cli
