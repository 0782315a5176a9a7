#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace magspec {

enum class ErrorCode {
  InvalidParameter,
  RejectsNonpositiveOmega,
  RejectsPositiveLambda,
  MissingPotential,
  InvalidPotential,
  InvalidGrid,
  GridTooCoarse,
  GridMisaligned,
  GridMismatch,
  NoConvergence,
  BracketFailure,
  DimensionTooSmall,
  BreakdownUnrecoverable,
  ZeroVector,
  SupercriticalInput,
  NotSubcritical,
  NotCritical,
  WindowEmpty,
  QuadratureUnderResolved,
  TargetUnreachable,
  OrthogonalityViolated,
  SolveFailed,
  SupportOverflow,
  NeverBelowThreshold,
  UnsupportedCombination,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// drivers can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace magspec
