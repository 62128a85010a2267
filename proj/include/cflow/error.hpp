#pragma once

#include <stdexcept>
#include <string>

namespace cflow {

// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/inf produced or consumed where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that an operation cannot handle (e.g. zero-norm rows).
class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Invalid configuration or argument values (sizes, fractions, thresholds).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cflow
