#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esr {

enum class ErrorCode {
  NotSquare,
  NotHermitian,
  NonFinite,
  DimensionMismatch,
  NotNormalized,
  InvalidArgument,
  ProbabilityOutOfRange,
  EventContainsNoRegistration,
  ZeroProbabilityBranch,
  IndexOutOfRange,
  DegenerateSpectrum,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::EventContainsNoRegistration: return "EventContainsNoRegistration";
    case ErrorCode::ZeroProbabilityBranch: return "ZeroProbabilityBranch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace esr
