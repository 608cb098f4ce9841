#pragma once

#include <stdexcept>
#include <string>

namespace kinfuse {

/// Input violates a documented contract (bad record, out-of-range value).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query generation filtered every token away.
class EmptyQueryError : public ValidationError {
 public:
  EmptyQueryError() : ValidationError("empty query") {}
};

}  // namespace kinfuse
