#pragma once

#include <stdexcept>
#include <string>

namespace cmm {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: wrong dimensions, out-of-range parameters, malformed options.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input data (CSV cells, inconsistent rows).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite intermediate values, singular systems, overflow of counts.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The requested sample space exceeds the enumeration guard.
class SpaceTooLarge : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cmm
