#pragma once

#include <string>
#include <vector>

namespace fedcast {

/// CLI entry point (argv without the program name). Subcommands: run, grid,
/// pretrain, manifest. Exit codes: 0 success, 2 malformed config or usage,
/// 3 divergence, 1 other failure.
int run_cli(const std::vector<std::string>& args);

} // namespace fedcast
