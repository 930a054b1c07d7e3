#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pagkit {

// Machine-readable failure categories. The string forms are stable and are
// what the CLI prints and what tests match on.
enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kExpOverflow,
  kEigFail,
  kNotHurwitz,
  kPeriodSingular,
  kEmpty,
  kNoConverge,
  kInvalidBound,
  kStructureMismatch,
  kDiverged,
  kNoPss,
  kUnboundedSuspect,
  kUnknownNonlinearity,
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

}  // namespace pagkit
