#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmcvx {

enum class ErrorCode {
  InvalidMatrix,
  NotPSD,
  RangeViolation,
  FactorMismatch,
  SingularM,
  NonCenteredMeans,
  DimensionMismatch,
  InvalidProblem,
  InvalidGamma,
  BothSingular,
  BracketNotSeparating,
  ChainViolation,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::FactorMismatch: return "FactorMismatch";
    case ErrorCode::SingularM: return "SingularM";
    case ErrorCode::NonCenteredMeans: return "NonCenteredMeans";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::BothSingular: return "BothSingular";
    case ErrorCode::BracketNotSeparating: return "BracketNotSeparating";
    case ErrorCode::ChainViolation: return "ChainViolation";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gmcvx
