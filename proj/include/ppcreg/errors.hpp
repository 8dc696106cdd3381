#pragma once

#include <stdexcept>
#include <string>

namespace ppcreg {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kEmptySurface,
  kInsufficientContours,
  kInsufficientConstraints,
  kRankDeficient,
  kNothingVisible,
  kFormat,
  kCountMismatch,
  kInfeasibleRanges,
  kIo,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers what failed
/// without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ppcreg
