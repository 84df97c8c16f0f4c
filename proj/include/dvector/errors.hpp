#pragma once

#include <stdexcept>
#include <string>

namespace dvector {

/// Base of every error raised by the library. The CLI maps subclasses to
/// exit codes: ConfigError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value, unknown key, or bad command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: files, shapes, labels, ids.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class InputError : public DataError {
 public:
  using DataError::DataError;
};

class TooShortError : public InputError {
 public:
  using InputError::InputError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class PathError : public DataError {
 public:
  using DataError::DataError;
};

/// NaN or Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dvector
