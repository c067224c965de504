#pragma once

#include <stdexcept>
#include <string>

namespace superinfo {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not conform to an operation's rule. The message names
/// the operation and the offending dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input value outside an operation's mathematical domain (log of a
/// non-positive value, non-positive noise std, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// API misuse: backward on a non-scalar, second backward on the same tape,
/// lookup of an unknown variable name.
class LogicError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration or data (bad config key, bad grid,
/// probability table that does not sum to one, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized payload. `code()` distinguishes the failure class so
/// callers can react to specific corruptions.
class FormatError : public Error {
 public:
  enum class Code {
    MagicMismatch,
    VersionMismatch,
    TruncatedPayload,
    Corrupt,
  };

  FormatError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Non-finite value produced at runtime (NaN/Inf loss component).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace superinfo
