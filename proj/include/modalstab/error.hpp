#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modalstab {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  // modal_core
  InfiniteUnstablePart,
  ResolventAtEigenvalue,
  UnstableModeDiscarded,
  NotReachable,
  // gains
  BetaExceedsDecay,
  BetaMismatch,
  SmoothnessMismatch,
  NotHurwitz,
  LyapunovSolveFailed,
  // synthesis
  NotStabilizable,
  NotDetectable,
  RiccatiDivergence,
  // plants
  QuadratureNotConverged,
  TailUnstable,
  KernelResonance,
  NoAdmissibleParameter,
  // sim_oracle
  Overflow,
  EigensolverNoConvergence,
  DegenerateTrajectory,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfiniteUnstablePart: return "InfiniteUnstablePart";
    case ErrorCode::ResolventAtEigenvalue: return "ResolventAtEigenvalue";
    case ErrorCode::UnstableModeDiscarded: return "UnstableModeDiscarded";
    case ErrorCode::NotReachable: return "NotReachable";
    case ErrorCode::BetaExceedsDecay: return "BetaExceedsDecay";
    case ErrorCode::BetaMismatch: return "BetaMismatch";
    case ErrorCode::SmoothnessMismatch: return "SmoothnessMismatch";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::LyapunovSolveFailed: return "LyapunovSolveFailed";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::NotDetectable: return "NotDetectable";
    case ErrorCode::RiccatiDivergence: return "RiccatiDivergence";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::TailUnstable: return "TailUnstable";
    case ErrorCode::KernelResonance: return "KernelResonance";
    case ErrorCode::NoAdmissibleParameter: return "NoAdmissibleParameter";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::EigensolverNoConvergence: return "EigensolverNoConvergence";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
  }
  return "Unknown";
}

/// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace modalstab
