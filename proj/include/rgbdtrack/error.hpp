#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgbdtrack {

enum class ErrorCode {
  kInvalidInput,
  kBehindCamera,
  kSynchronization,
  kDimensionMismatch,
  kFit,
  kNumerical,
  kInfeasibleTheta,
  kInfeasibleAlpha,
  kConfig,
  kNoOutput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kSynchronization: return "synchronization";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kFit: return "fit";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kInfeasibleTheta: return "infeasible-theta";
    case ErrorCode::kInfeasibleAlpha: return "infeasible-alpha";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kNoOutput: return "no-output";
  }
  return "unknown";
}

/// Every failure in the library is reported through this type; `code()`
/// lets callers branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rgbdtrack
