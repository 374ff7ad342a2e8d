#pragma once

#include <stdexcept>
#include <string>

namespace mdpalloc {

// Caller supplied data that violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Serialized input that is malformed or fails validation on load.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Solver could not meet its residual budget even after refactorization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumeration-based baseline asked to handle too many resources.
class BlowupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transform construction hit a zero column or similar degenerate input.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdpalloc
