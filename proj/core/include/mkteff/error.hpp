#pragma once

#include <stdexcept>
#include <string>

namespace mkteff {

enum class ErrorKind {
  EmptyInput,
  Parse,
  InsufficientData,
  Degenerate,
  Numerical,
  FitFailure,
  Io,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure reported by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A malformed input row; `line()` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mkteff
