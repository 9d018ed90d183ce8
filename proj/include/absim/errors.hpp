#pragma once

#include <stdexcept>
#include <string>

namespace absim {

// Base of every error the library throws. The CLI maps the concrete type
// onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent input: bad state, non-unitary matrix, overlapping couplings,
// infeasible parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Data that carries no information: no kept Monte Carlo trials, all-zero
// counts handed to a fit.
class DegenerateDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A configured size cap (basis dimension, permanent order, ...) was exceeded.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Malformed scenario or data file. Carries the offending field and line when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::string field, int line)
      : ValidationError(what), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace absim
