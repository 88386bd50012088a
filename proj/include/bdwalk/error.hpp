#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdwalk {

enum class ErrorCode {
  // bdp-core
  ViolatesHalf,
  ZeroInfimum,
  OutOfRange,
  TailDivergent,
  NotErgodic,
  NotStronglyErgodic,
  NotErgodicModified,
  ZeroRateInsideSupport,
  // environment
  UnsupportedDimension,
  NonMonotoneQuery,
  InitNotExponentialTail,
  // walk
  Stalled,
  ZeroRateTail,
  SeedMismatch,
  InvalidJumpDistribution,
  // coupling
  NonMonotonePhi,
  InitNotDominated,
  ConditionsUnmet,
  // stats
  SampleTooSmall,
  SingularSigma,
  // cli
  ConfigError,
  RuntimeFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bdwalk
