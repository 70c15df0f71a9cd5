#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shift {

// Every failure the library can raise. The numeric value doubles as the CLI
// exit code, so entries are append-only.
enum class ErrorCode : int {
  kMalformedManifest = 10,
  kSizeMismatch = 11,
  kNonFiniteValue = 12,
  kShapeMismatch = 13,
  kEmptyPool = 14,
  kMalformedRecord = 15,
  kPositiveLogprob = 16,
  kIoError = 17,
  kEmptyMatrix = 20,
  kDimMismatch = 21,
  kNegativeUtility = 22,
  kZeroFeature = 23,
  kBudgetExceedsPool = 30,
  kInvalidParams = 31,
  kEmptyRollouts = 40,
  kTooFewRollouts = 41,
  kZeroEmbedding = 42,
  kEmptyTokens = 43,
  kUnknownScore = 44,
  kDegenerateSeries = 50,
  kJoinMismatch = 51,
  kEmptyAnswer = 60,
  kNonPositiveRatio = 61,
  kNegativeKlTerm = 62,
  kInvalidDistribution = 63,
  kOutputExists = 70,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kPositiveLogprob: return "PositiveLogprob";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kNegativeUtility: return "NegativeUtility";
    case ErrorCode::kZeroFeature: return "ZeroFeature";
    case ErrorCode::kBudgetExceedsPool: return "BudgetExceedsPool";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kEmptyRollouts: return "EmptyRollouts";
    case ErrorCode::kTooFewRollouts: return "TooFewRollouts";
    case ErrorCode::kZeroEmbedding: return "ZeroEmbedding";
    case ErrorCode::kEmptyTokens: return "EmptyTokens";
    case ErrorCode::kUnknownScore: return "UnknownScore";
    case ErrorCode::kDegenerateSeries: return "DegenerateSeries";
    case ErrorCode::kJoinMismatch: return "JoinMismatch";
    case ErrorCode::kEmptyAnswer: return "EmptyAnswer";
    case ErrorCode::kNonPositiveRatio: return "NonPositiveRatio";
    case ErrorCode::kNegativeKlTerm: return "NegativeKlTerm";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kOutputExists: return "OutputExists";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace shift
