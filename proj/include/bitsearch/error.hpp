// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bitsearch {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input files, parameters or invariant violations. The CLI maps
/// these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A quality evaluator failed (crashed, timed out, returned garbage).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Wire-protocol violation by an external evaluator.
class ProtocolError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// The surrogate linear system could not be solved.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A lookup (e.g. budget-constrained selection) found no admissible entry.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace bitsearch
