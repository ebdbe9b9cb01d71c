#pragma once

#include <stdexcept>
#include <string>

namespace vvs {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration. Carries the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Missing, truncated or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor/batch dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training or evaluation (non-finite loss, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vvs
