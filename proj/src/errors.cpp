#include "arena/errors.hpp"

namespace arena {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain_error";
    case ErrorCode::kNumerical: return "numerical_error";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kNonFiniteScore: return "non_finite_score";
    case ErrorCode::kMissingTaskScore: return "missing_task_score";
    case ErrorCode::kAgentSetMismatch: return "agent_set_mismatch";
    case ErrorCode::kNoMatchAvailable: return "no_match_available";
    case ErrorCode::kUnknownJudge: return "unknown_judge";
    case ErrorCode::kUnknownMatch: return "unknown_match";
    case ErrorCode::kAlreadyCompleted: return "already_completed";
    case ErrorCode::kNotAssignedToJudge: return "not_assigned_to_judge";
    case ErrorCode::kMatchExpired: return "match_expired";
    case ErrorCode::kSchemaViolation: return "schema_violation";
    case ErrorCode::kStorageFailure: return "storage_failure";
    case ErrorCode::kCorruptLog: return "corrupt_log";
    case ErrorCode::kEmptyCompetition: return "empty_competition";
    case ErrorCode::kMissingTruth: return "missing_truth";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kNotFound: return "not_found";
  }
  return "unknown";
}

}  // namespace arena
