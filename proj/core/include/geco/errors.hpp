#pragma once

#include <stdexcept>
#include <string>

namespace geco {

/// Base of every error the toolkit throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t >= 1, Ei(0), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector lengths or list sizes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, divergence, or numerically impossible intermediate results.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Inputs that make a quantity undefined (zero-power reference, silent noise).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  explicit FormatError(const std::string& what) : Error(what) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_ = 0;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before the stage it depends on produced its checkpoint.
class OrderingError : public Error {
 public:
  using Error::Error;
};

}  // namespace geco
