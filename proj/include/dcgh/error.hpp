#pragma once

#include <stdexcept>
#include <string>

namespace dcgh {

enum class ErrorCode {
  kMissingFile,
  kIo,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kNonFinite,
  kDomain,
  kZeroLabelRow,
  kShapeMismatch,
  kInvalidArgument,
  kUndefinedMetric,
  kEmptyInput,
  kConfig,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this type; `code()` lets callers
// tell the failure modes apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dcgh
