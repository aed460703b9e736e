#pragma once

#include <stdexcept>
#include <string>

namespace netid {

enum class ErrorCode {
  kInvalidDimension,
  kInvalidParameter,
  kInvalidInput,
  kUnsupportedModel,
  kUnsupportedShape,
  kUnsupportedTopology,
  kRankDeficient,
  kSingularModel,
  kInconsistentData,
  kDomain,
  kDegenerateVariance,
  kEvaluation,
  kInvalidStart,
  kSamplingFailure,
  kEstimation,
  kRecovery,
  kWellPosedness,
  kUndefinedFit,
  kOracleInapplicable,
  kAllRunsFailed,
  kConfig,
  kSchema,
  kIo,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers (the CLI in
/// particular) which failure class occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace netid
