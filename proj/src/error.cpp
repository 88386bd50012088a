#include "bdwalk/error.hpp"

namespace bdwalk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ViolatesHalf: return "ViolatesHalf";
    case ErrorCode::ZeroInfimum: return "ZeroInfimum";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::TailDivergent: return "TailDivergent";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::NotStronglyErgodic: return "NotStronglyErgodic";
    case ErrorCode::NotErgodicModified: return "NotErgodicModified";
    case ErrorCode::ZeroRateInsideSupport: return "ZeroRateInsideSupport";
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::NonMonotoneQuery: return "NonMonotoneQuery";
    case ErrorCode::InitNotExponentialTail: return "InitNotExponentialTail";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::ZeroRateTail: return "ZeroRateTail";
    case ErrorCode::SeedMismatch: return "SeedMismatch";
    case ErrorCode::InvalidJumpDistribution: return "InvalidJumpDistribution";
    case ErrorCode::NonMonotonePhi: return "NonMonotonePhi";
    case ErrorCode::InitNotDominated: return "InitNotDominated";
    case ErrorCode::ConditionsUnmet: return "ConditionsUnmet";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::RuntimeFailure: return "RuntimeFailure";
  }
  return "Unknown";
}

}  // namespace bdwalk
