#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lqconic {

enum class ErrorCode {
  kDimensionMismatch,
  kNotPsd,
  kM22NotPd,
  kZeroInput,
  kRNotPd,
  kGammaNotPositive,
  kDNotStrictlyPassive,
  kQNotPsd,
  kXiNotPsd,
  kWNotPsd,
  kBadHorizon,
  kNonFinite,
  kResidualTooLarge,
  kRankTooHigh,
  kEscapeUnexpected,
  kBracketFailure,
  kGridMismatch,
  kValidation,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string field;
  std::string message;
};

// Thrown by validate(); carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const { return violations_; }
  bool has(ErrorCode code) const;

 private:
  std::vector<Violation> violations_;
};

}  // namespace lqconic
