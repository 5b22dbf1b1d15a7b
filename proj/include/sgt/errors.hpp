#pragma once

#include <stdexcept>
#include <string>

namespace sgt {

// Error families map 1:1 onto process exit codes (see sgt.h):
// config=2, data=3, numeric=4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or precondition violation detected before work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed input data (files, manifests, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, undefined metrics, failed numeric contracts.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes. A shape mismatch always traces back to an
// inconsistent configuration, hence the parent class.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace sgt
