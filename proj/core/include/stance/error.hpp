#pragma once

#include <stdexcept>
#include <string>

namespace stance {

// Malformed or inconsistent input: bad CSV, unknown labels, dangling ids,
// invalid asset files, invalid configuration.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// A computation produced something it must not (non-finite gradients,
// shape mismatch between a trace and the parameters it was taken from).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Output could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stance
