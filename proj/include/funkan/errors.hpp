#pragma once

#include <stdexcept>
#include <string>

namespace funkan {

// Incompatible tensor shapes or illegal extents.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad configuration, unknown names, illegal hyper-parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or malformed input files, empty splits.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values in activations, gradients or inputs.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Process exit code for an exception, grouped by error class:
/// config (and shape) = 2, data = 3, numeric = 4, anything else = 1.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace funkan
