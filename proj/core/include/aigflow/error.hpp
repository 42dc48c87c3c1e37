#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aigflow {

enum class ErrorCode {
  kParse,
  kUnsupported,
  kOutOfRange,
  kCycle,
  kInvalidArgument,
  kShapeMismatch,
  kNonFinite,
  kStoreCorruption,
  kInvariantBreach,
  kCallbackFailure,
  kIo,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All library failures are reported through this exception; `code()` is the
/// machine-readable category the CLI echoes back in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aigflow
