#pragma once

#include <stdexcept>
#include <string>

namespace ovseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested operator.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or inconsistent file or dataset content.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace ovseg
