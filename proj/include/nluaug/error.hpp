#pragma once

#include <stdexcept>
#include <string>

namespace nluaug {

// Error hierarchy. The CLI maps each family to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, flags or API preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or diverging optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace nluaug
