#pragma once

#include <stdexcept>
#include <string>

namespace edac {

/// Base of every error raised by the library. Each subclass maps to one
/// failure category so callers (notably the CLI) can translate it to an
/// exit status without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model/attack/training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or otherwise left the finite domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Differentiation reached a primitive that has no gradient rule.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset file. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Unreadable, corrupt or incompatible checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace edac
