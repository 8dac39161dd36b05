#pragma once

#include <stdexcept>
#include <string>

namespace atomscope {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A numeric argument violates a precondition (sign, range, shape).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

// A query landed outside a model's domain of validity (inside the
// analytic cutoff radius, outside a tabulated grid).
class OutOfDomainError : public Error {
 public:
  using Error::Error;
};

// Parameters fall outside the regime the model supports (eta >= 1).
class UnsupportedRegimeError : public Error {
 public:
  using Error::Error;
};

// The data carry no usable feature (flat curve, missing loss dip).
class InsufficientSignalError : public Error {
 public:
  using Error::Error;
};

// An iterative solver ran out of iterations; message carries the last iterate.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message carries the row number.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace atomscope
