#pragma once

#include <string>
#include <vector>

namespace sphcov::cli {

// Batch pipeline driver with the verbs simulate, fit, cv, eval. Returns the
// process exit code: 0 success, 2 configuration error, 3 numerical failure,
// 4 I/O failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace sphcov::cli
