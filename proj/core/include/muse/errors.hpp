#pragma once

#include <stdexcept>
#include <string>

namespace muse {

// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration or precondition on user-supplied parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or malformed dataset files.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, solver non-convergence and similar numeric failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace muse
