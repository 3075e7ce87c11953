#pragma once

#include <stdexcept>
#include <string>

namespace ndepr {

// Failure categories map one-to-one onto CLI exit codes.
enum class ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kNumericFailure = 3,
  kIoFailure = 4,
};

/// Invalid input: bad config, bad data file, violated precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ndepr
