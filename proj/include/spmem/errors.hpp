#pragma once

#include <stdexcept>
#include <string>

namespace spmem {

// Problems with input data files or their contents.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (bad schema, missing keys, bad values).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: non-SPD matrices, invalid distribution parameters.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spmem
