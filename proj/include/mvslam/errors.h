#pragma once

#include <stdexcept>
#include <string>

namespace mvslam {

// Precondition violations on public API arguments.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Too few samples, pairs, or valid pixels for a metric to be defined.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed-form alignment hit a rank-deficient configuration.
class AlignmentFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. `line()` is 1-based; 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Unsupported or corrupt binary file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid pipeline configuration (unknown key, out-of-range value, missing path).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or inconsistent dataset content.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvslam
