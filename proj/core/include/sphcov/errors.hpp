#pragma once

#include <stdexcept>

namespace sphcov {

// Error categories mapped to CLI exit codes (2/3/4). Precondition violations
// inside the library throw std::invalid_argument / std::domain_error, which
// the CLI treats as configuration errors as well.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sphcov
