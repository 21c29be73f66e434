#pragma once

#include <stdexcept>
#include <string>

namespace aefe {

/// Base class of every error the engine raises. The CLI maps the
/// concrete type onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

/// Invalid configuration, flags or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A feature template that does not fit the dataset it is applied to.
class TemplateError : public DataError {
 public:
  using DataError::DataError;
};

/// A metric that is undefined for its inputs (e.g. AUC on one class).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace aefe
