#pragma once

#include <stdexcept>
#include <string>

namespace star {

/// Invalid configuration or invalid arguments to an operation.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed dataset / checkpoint / bank files, missing artifacts.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate numeric input or a non-finite intermediate value.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace star
