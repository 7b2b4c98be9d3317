#pragma once

#include <stdexcept>

namespace graphfolio {

// Bad knobs or malformed settings: CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unusable input data (malformed CSV, empty universe, ...): exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical or orchestration failure at runtime: exit code 4.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace graphfolio
