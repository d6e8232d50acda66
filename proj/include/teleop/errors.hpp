#pragma once

#include <stdexcept>
#include <string>

namespace teleop {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
public:
  using DataError::DataError;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class LimitError : public Error {
public:
  using Error::Error;
};

// Carries the positional residual left after the IK iteration budget.
class UnreachableError : public Error {
public:
  UnreachableError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

class NoPathError : public Error {
public:
  using Error::Error;
};

class ProtocolError : public Error {
public:
  using Error::Error;
};

class SizeError : public ProtocolError {
public:
  using ProtocolError::ProtocolError;
};

class FitError : public Error {
public:
  using Error::Error;
};

class IncompleteUploadError : public Error {
public:
  using Error::Error;
};

}  // namespace teleop
