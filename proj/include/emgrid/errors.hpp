#pragma once

#include <stdexcept>
#include <string>

namespace emgrid {

/// Malformed or inconsistent user input (netlist, thermal map, parameters).
/// The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax error with a 1-based source position.
class ParseError : public InputError {
 public:
  ParseError(std::string source, int line, int column, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                   what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// Singular systems, factorization failures, non-finite states.
/// The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emgrid
