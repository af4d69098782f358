#pragma once

// Append-only competition events: one JSON object per log line.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace arena {

using json = nlohmann::json;

enum class EventKind {
  kCompetitionCreated,
  kAgentRegistered,
  kTaskRegistered,
  kSeedRegistered,
  kVideoRegistered,
  kJudgeRegistered,
  kMatchScheduled,
  kMatchAssigned,
  kVerdictSubmitted,
  kMatchExpired,
  kConfigUpdated,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct Event {
  std::int64_t seq = 0;
  std::int64_t at = 0;  // UTC milliseconds, supplied by the caller's clock
  EventKind kind = EventKind::kCompetitionCreated;
  json payload = json::object();
};

/// Throws SchemaViolation when the payload does not fit the kind.
void validate_payload(EventKind kind, const json& payload);

json to_json(const Event& event);

/// Parses and validates one record. Throws SchemaViolation.
Event event_from_json(const json& doc);

/// The exact bytes written to the log (sorted keys, no trailing newline).
std::string canonical_line(const Event& event);

}  // namespace arena
