#pragma once

#include <stdexcept>
#include <string>

namespace gds {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or grid extents are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation precondition (e.g. non-scalar backward root).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An argument value is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A configuration document or configuration value is invalid.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// An operation produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Binary container / checkpoint decoding errors.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MissingTensorError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gds
