#pragma once

#include <stdexcept>
#include <string>

namespace persona {

/// Bad input: malformed files, invariant violations, unknown columns.
/// The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while computing on valid input (divergence, I/O during output).
/// The CLI maps it to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested behaviour exists in the interface but is outside what is built.
class UnsupportedFeature : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace persona
