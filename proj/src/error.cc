#include "lqconic/error.h"

#include <algorithm>

namespace lqconic {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPsd: return "NotPSD";
    case ErrorCode::kM22NotPd: return "M22NotPD";
    case ErrorCode::kZeroInput: return "ZeroInput";
    case ErrorCode::kRNotPd: return "RNotPD";
    case ErrorCode::kGammaNotPositive: return "GammaNotPositive";
    case ErrorCode::kDNotStrictlyPassive: return "DNotStrictlyPassive";
    case ErrorCode::kQNotPsd: return "QNotPSD";
    case ErrorCode::kXiNotPsd: return "XiNotPSD";
    case ErrorCode::kWNotPsd: return "WNotPSD";
    case ErrorCode::kBadHorizon: return "BadHorizon";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::kRankTooHigh: return "RankTooHigh";
    case ErrorCode::kEscapeUnexpected: return "EscapeUnexpected";
    case ErrorCode::kBracketFailure: return "BracketFailure";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::string out = "validation failed:";
  for (const auto& v : violations) {
    out += "\n  ";
    out += v.field;
    out += ": ";
    out += to_string(v.code);
    out += " (";
    out += v.message;
    out += ")";
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(ErrorCode::kValidation, summarize(violations)),
      violations_(std::move(violations)) {}

bool ValidationError::has(ErrorCode code) const {
  return std::any_of(violations_.begin(), violations_.end(),
                     [code](const Violation& v) { return v.code == code; });
}

}  // namespace lqconic
