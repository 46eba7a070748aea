#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyspec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV, JSON, grid specs).
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Input parsed but violates a domain invariant (duplicate times, bad sigma...).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Not enough observations to form the requested quantity.
class InsufficientDataError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. Im z <= 0).
class DomainError : public Error {
public:
  using Error::Error;
};

/// A caller broke an operation's precondition (non-symmetric matrix, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

/// Fixed-point solver gave up; carries the last residual.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

}  // namespace hyspec
