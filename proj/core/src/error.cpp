#include "aigflow/error.hpp"

namespace aigflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kStoreCorruption: return "store_corruption";
    case ErrorCode::kInvariantBreach: return "invariant_breach";
    case ErrorCode::kCallbackFailure: return "callback_failure";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

}  // namespace aigflow
