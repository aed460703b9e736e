#include "netid/error.hpp"

namespace netid {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid dimension";
    case ErrorCode::kInvalidParameter: return "invalid parameter";
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kUnsupportedModel: return "unsupported model";
    case ErrorCode::kUnsupportedShape: return "unsupported shape";
    case ErrorCode::kUnsupportedTopology: return "unsupported topology";
    case ErrorCode::kRankDeficient: return "rank deficient";
    case ErrorCode::kSingularModel: return "singular model";
    case ErrorCode::kInconsistentData: return "inconsistent data";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kDegenerateVariance: return "degenerate variance";
    case ErrorCode::kEvaluation: return "evaluation error";
    case ErrorCode::kInvalidStart: return "invalid start";
    case ErrorCode::kSamplingFailure: return "sampling failure";
    case ErrorCode::kEstimation: return "estimation error";
    case ErrorCode::kRecovery: return "recovery error";
    case ErrorCode::kWellPosedness: return "ill-posed network";
    case ErrorCode::kUndefinedFit: return "undefined fit";
    case ErrorCode::kOracleInapplicable: return "oracle inapplicable";
    case ErrorCode::kAllRunsFailed: return "all runs failed";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kIo: return "I/O error";
  }
  return "error";
}

}  // namespace netid
