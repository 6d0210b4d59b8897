// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace danet {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not compose; the message names both shapes.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : ParseError(what, 0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally inconsistent data, e.g. ragged channel counts.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A class label that is not part of the declared vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// A configuration value failed to type-check or validate.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant (e.g. accuracy outside [0, 1]).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace danet
