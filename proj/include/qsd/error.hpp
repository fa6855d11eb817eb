#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsd {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kEventCapExceeded,
  kNegativeRate,
  kSelfLoop,
  kSupercriticalSpec,
  kRateTooSmall,
  kTruncationLeak,
  kStepUnstable,
  kNotIrreducible,
  kNoConvergence,
  kNoStabilization,
  kDeadConfig,
  kPathTooShort,
  kNegativeMean,
  kAllExtinct,
  kDegenerateInput,
  kConfigInvalid,
  kUnsupported,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (tests, the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qsd
