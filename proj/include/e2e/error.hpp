#pragma once

#include <stdexcept>
#include <string>

namespace e2e {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or grid dimensions disagree; the message names the offending axis.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (bad order, divisibility, CP length, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API contract (non-scalar loss, missing pilots, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file (checkpoint, config, constellation table).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace e2e
