#pragma once

#include <stdexcept>
#include <string>

namespace gpool {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A mask left no active position to normalize or reduce over.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied values violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A contract of the autodiff engine was broken (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A well-formed file whose contents are inconsistent (e.g. vector widths).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset content that cannot be mapped (e.g. an undeclared label).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a NaN or infinite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpool
