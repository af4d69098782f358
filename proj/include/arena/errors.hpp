#pragma once

#include <stdexcept>
#include <string>

namespace arena {

/// Stable machine-readable error categories. The service maps these onto
/// HTTP status codes and the CLI onto exit codes.
enum class ErrorCode {
  kDomain,
  kNumerical,
  kEmptyInput,
  kNonFiniteScore,
  kMissingTaskScore,
  kAgentSetMismatch,
  kNoMatchAvailable,
  kUnknownJudge,
  kUnknownMatch,
  kAlreadyCompleted,
  kNotAssignedToJudge,
  kMatchExpired,
  kSchemaViolation,
  kStorageFailure,
  kCorruptLog,
  kEmptyCompetition,
  kMissingTruth,
  kDuplicate,
  kNotFound,
};

const char* to_string(ErrorCode code);

class ArenaError : public std::runtime_error {
 public:
  ArenaError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when the event log cannot be replayed; seq names the first bad record.
class CorruptLogError : public ArenaError {
 public:
  CorruptLogError(long long seq, const std::string& message)
      : ArenaError(ErrorCode::kCorruptLog,
                   "corrupt log at seq " + std::to_string(seq) + ": " + message),
        seq_(seq) {}

  long long seq() const noexcept { return seq_; }

 private:
  long long seq_;
};

}  // namespace arena
