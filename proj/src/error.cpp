#include "qsd/error.hpp"

namespace qsd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kEventCapExceeded: return "EventCapExceeded";
    case ErrorCode::kNegativeRate: return "NegativeRate";
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kSupercriticalSpec: return "SupercriticalSpec";
    case ErrorCode::kRateTooSmall: return "RateTooSmall";
    case ErrorCode::kTruncationLeak: return "TruncationLeak";
    case ErrorCode::kStepUnstable: return "StepUnstable";
    case ErrorCode::kNotIrreducible: return "NotIrreducible";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNoStabilization: return "NoStabilization";
    case ErrorCode::kDeadConfig: return "DeadConfig";
    case ErrorCode::kPathTooShort: return "PathTooShort";
    case ErrorCode::kNegativeMean: return "NegativeMean";
    case ErrorCode::kAllExtinct: return "AllExtinct";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kUnsupported: return "Unsupported";
  }
  return "Unknown";
}

}  // namespace qsd
