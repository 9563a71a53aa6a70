#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rieszfield {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Structurally valid input that violates a model invariant or precondition.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Factorization breakdown, non-convergence and similar numeric failures.
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace rieszfield
