#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace kernet {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside the kernel's domain box.
class DomainError : public Error {
public:
  using Error::Error;
};

/// An argument violates a documented precondition (empty set, bad range, size mismatch).
class ParameterError : public Error {
public:
  using Error::Error;
};

/// A linear-algebra step failed beyond recovery (factorization, eigensolve).
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what,
                          std::optional<double> condition_estimate = std::nullopt)
      : Error(what), condition_estimate(condition_estimate) {}

  std::optional<double> condition_estimate;
};

/// Configuration text could not be parsed or resolved into a valid run.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File input/output failed.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace kernet
