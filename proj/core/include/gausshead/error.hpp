#pragma once

#include <stdexcept>
#include <string>

namespace gausshead {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or input that fails validation. The message names the
/// offending field. The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (JSON syntax, binary size, header fields).
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Tensor or grid shapes that do not agree.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gausshead
