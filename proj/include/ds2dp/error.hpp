#pragma once

#include <stdexcept>
#include <string>

namespace ds2dp {

// Dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Violated precondition (negative threshold, non-scalar backward root, ...).
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed config, flag or file content. Carries the offending line when known.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string &what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite or runaway objective during solving.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A quantity that has no meaningful value for the given input (e.g. SAM on all-zero spectra).
class UndefinedError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace ds2dp
