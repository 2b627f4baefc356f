#pragma once

#include <stdexcept>
#include <string>

namespace secmax {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a precondition (shape or width mismatch, invalid argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A signed value does not lie in Z_q.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A scaled quantity cannot be represented in Z_q.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// A state lies outside the declared state domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Circuit construction failed.
class BuildError : public Error {
 public:
  using Error::Error;
};

/// Plaintext or garbled evaluation failed.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A party saw an out-of-order, stale, malformed, or replayed message.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A blocking receive exceeded its deadline.
class TimeoutError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace secmax
