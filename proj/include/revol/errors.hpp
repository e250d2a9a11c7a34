#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace revol {

/// Base of every error raised by the library. The CLI maps subclasses of
/// UserError to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems caused by inputs the caller controls (files, flags, configs).
class UserError : public Error {
 public:
  using Error::Error;
};

class ParseError : public UserError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : UserError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public UserError {
 public:
  using UserError::UserError;
};

class SizingError : public UserError {
 public:
  using UserError::UserError;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class ArgumentError : public UserError {
 public:
  using UserError::UserError;
};

class LoadError : public UserError {
 public:
  using UserError::UserError;
};

/// Training data from which no usable sample survives.
class DataError : public UserError {
 public:
  using UserError::UserError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// log/sqrt of out-of-domain values, nonpositive prices, NaN/Inf at graph boundaries.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// Volatility (or another scale) too small to divide by.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class MetricUndefinedError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace revol
