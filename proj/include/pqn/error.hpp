#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pqn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a dataset invariant (unknown label, duplicate feature, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Label taxonomy is not a rooted tree.
class HierarchyError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition, e.g. reading gradients from a stale inference cache.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Armijo backtracking ran out of trials.
class LineSearchError : public Error {
 public:
  LineSearchError(const std::string& what, double model_decrease, double last_trial)
      : Error(what), model_decrease_(model_decrease), last_trial_(last_trial) {}

  double model_decrease() const { return model_decrease_; }
  double last_trial_objective() const { return last_trial_; }

 private:
  double model_decrease_;
  double last_trial_;
};

// Objective became NaN or infinite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Brute-force oracle asked to enumerate more states than it allows.
class TooLargeError : public Error {
 public:
  using Error::Error;
};

}  // namespace pqn
