#pragma once

#include <stdexcept>
#include <string>

namespace saspa {

/// Base class for every error raised by the library. The CLI maps the three
/// families below onto process exit codes 1, 2 and 3.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate a precondition (bad sizes, bad
/// hyperparameters, M > N, ...).
class UsageError : public Error {
public:
  using Error::Error;
};

/// Input data is malformed or inconsistent with the requested task.
class DataError : public Error {
public:
  using Error::Error;
};

/// A numerical procedure failed (factorization, divergence, negative
/// predictive variance beyond round-off).
class NumericalError : public Error {
public:
  using Error::Error;
};

class FactorizationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool cond, const std::string &what) {
  if (!cond) {
    throw UsageError(what);
  }
}

} // namespace detail

} // namespace saspa
