#include "ppcreg/errors.hpp"

namespace ppcreg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kEmptySurface: return "empty-surface";
    case ErrorCode::kInsufficientContours: return "insufficient-contours";
    case ErrorCode::kInsufficientConstraints: return "insufficient-constraints";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kNothingVisible: return "nothing-visible";
    case ErrorCode::kFormat: return "format-error";
    case ErrorCode::kCountMismatch: return "count-mismatch";
    case ErrorCode::kInfeasibleRanges: return "infeasible-ranges";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

}  // namespace ppcreg
