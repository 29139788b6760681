#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace posecam {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Ground-truth trajectory with (near-)zero mean step length.
class DegenerateTrajectory : public Error {
 public:
  using Error::Error;
};

/// Too few or rank-deficient point sets for a similarity fit.
class AlignmentDegenerate : public Error {
 public:
  using Error::Error;
};

class SamplingFailed : public Error {
 public:
  SamplingFailed(const std::string& what, int restarts)
      : Error(what), restarts_(restarts) {}
  int restarts() const { return restarts_; }

 private:
  int restarts_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a structural rule (ordering, magic, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace posecam
