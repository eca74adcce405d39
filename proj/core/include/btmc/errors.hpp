#pragma once

#include <stdexcept>

namespace btmc {

// Invalid parameters, presets or input files.  The CLI maps this to exit
// code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed to converge or produced an unusable result.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace btmc
