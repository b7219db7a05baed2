#pragma once

namespace dencgp {

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 2 configuration or I/O error, 3 data or model error,
/// 4 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace dencgp
