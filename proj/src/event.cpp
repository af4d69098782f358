#include "arena/event.hpp"

#include <array>
#include <initializer_list>
#include <utility>

#include "arena/errors.hpp"

namespace arena {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 11> kKindNames{{
    {EventKind::kCompetitionCreated, "CompetitionCreated"},
    {EventKind::kAgentRegistered, "AgentRegistered"},
    {EventKind::kTaskRegistered, "TaskRegistered"},
    {EventKind::kSeedRegistered, "SeedRegistered"},
    {EventKind::kVideoRegistered, "VideoRegistered"},
    {EventKind::kJudgeRegistered, "JudgeRegistered"},
    {EventKind::kMatchScheduled, "MatchScheduled"},
    {EventKind::kMatchAssigned, "MatchAssigned"},
    {EventKind::kVerdictSubmitted, "VerdictSubmitted"},
    {EventKind::kMatchExpired, "MatchExpired"},
    {EventKind::kConfigUpdated, "ConfigUpdated"},
}};

[[noreturn]] void violation(EventKind kind, const std::string& what) {
  throw ArenaError(ErrorCode::kSchemaViolation,
                   std::string(to_string(kind)) + ": " + what);
}

enum class Field { kString, kUnsigned, kInteger, kNumber, kObject, kArray };

bool has_type(const json& v, Field type) {
  switch (type) {
    case Field::kString:
      return v.is_string() && !v.get_ref<const std::string&>().empty();
    case Field::kUnsigned:
      return v.is_number_unsigned() ||
             (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Field::kInteger:
      return v.is_number_integer();
    case Field::kNumber:
      return v.is_number();
    case Field::kObject:
      return v.is_object();
    case Field::kArray:
      return v.is_array();
  }
  return false;
}

struct Spec {
  const char* name;
  Field type;
  bool required = true;
};

void check(EventKind kind, const json& payload, std::initializer_list<Spec> fields) {
  if (!payload.is_object()) violation(kind, "payload must be an object");
  for (const auto& f : fields) {
    auto it = payload.find(f.name);
    if (it == payload.end()) {
      if (f.required) violation(kind, std::string("missing field '") + f.name + "'");
      continue;
    }
    if (!has_type(*it, f.type)) {
      violation(kind, std::string("field '") + f.name + "' has the wrong type");
    }
  }
  for (auto it = payload.begin(); it != payload.end(); ++it) {
    bool known = false;
    for (const auto& f : fields) known = known || it.key() == f.name;
    if (!known) violation(kind, "unexpected field '" + it.key() + "'");
  }
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

void validate_payload(EventKind kind, const json& payload) {
  using F = Field;
  switch (kind) {
    case EventKind::kCompetitionCreated:
      check(kind, payload,
            {{"id", F::kString}, {"name", F::kString}, {"criteria", F::kArray},
             {"rating", F::kObject, false}, {"engine", F::kObject, false},
             {"rng_seed", F::kUnsigned, false}});
      if (payload.at("criteria").empty()) violation(kind, "criteria must not be empty");
      for (const auto& c : payload.at("criteria")) {
        if (!c.is_string()) violation(kind, "criteria must be strings");
      }
      break;
    case EventKind::kAgentRegistered:
      check(kind, payload, {{"agent", F::kString}});
      break;
    case EventKind::kTaskRegistered:
      check(kind, payload, {{"task", F::kString}, {"description", F::kString, false}});
      break;
    case EventKind::kSeedRegistered:
      check(kind, payload, {{"task", F::kString}, {"seed", F::kString}});
      break;
    case EventKind::kVideoRegistered:
      check(kind, payload,
            {{"agent", F::kString}, {"task", F::kString}, {"seed", F::kString},
             {"uri", F::kString}, {"duration_s", F::kNumber, false}});
      break;
    case EventKind::kJudgeRegistered:
      check(kind, payload, {{"judge", F::kString}, {"token", F::kString}});
      break;
    case EventKind::kMatchScheduled:
      check(kind, payload,
            {{"match", F::kUnsigned}, {"task", F::kString}, {"seed", F::kString},
             {"first", F::kString}, {"second", F::kString}, {"criterion", F::kString}});
      if (payload.at("first") == payload.at("second")) violation(kind, "self-match");
      break;
    case EventKind::kMatchAssigned:
      check(kind, payload,
            {{"match", F::kUnsigned}, {"judge", F::kString}, {"deadline", F::kInteger}});
      break;
    case EventKind::kVerdictSubmitted:
      check(kind, payload,
            {{"match", F::kUnsigned}, {"judge", F::kString}, {"outcome", F::kString}});
      {
        const auto& o = payload.at("outcome").get_ref<const std::string&>();
        if (o != "first" && o != "second" && o != "draw" && o != "skip") {
          violation(kind, "unknown outcome '" + o + "'");
        }
      }
      break;
    case EventKind::kMatchExpired:
      check(kind, payload, {{"match", F::kUnsigned}});
      break;
    case EventKind::kConfigUpdated:
      check(kind, payload,
            {{"rating", F::kObject, false}, {"engine", F::kObject, false},
             {"normalized_scores", F::kObject, false},
             {"revoked_judges", F::kArray, false}});
      break;
  }
}

json to_json(const Event& event) {
  return json{{"seq", event.seq},
              {"at", event.at},
              {"kind", std::string(to_string(event.kind))},
              {"payload", event.payload}};
}

Event event_from_json(const json& doc) {
  if (!doc.is_object() || doc.size() != 4 || !doc.contains("seq") ||
      !doc.contains("at") || !doc.contains("kind") || !doc.contains("payload")) {
    throw ArenaError(ErrorCode::kSchemaViolation,
                     "record must have exactly seq, at, kind, payload");
  }
  if (!doc["seq"].is_number_integer() || !doc["at"].is_number_integer() ||
      !doc["kind"].is_string()) {
    throw ArenaError(ErrorCode::kSchemaViolation, "bad seq/at/kind types");
  }
  auto kind = event_kind_from_string(doc["kind"].get<std::string>());
  if (!kind) {
    throw ArenaError(ErrorCode::kSchemaViolation,
                     "unknown event kind " + doc["kind"].get<std::string>());
  }
  Event e;
  e.seq = doc["seq"].get<std::int64_t>();
  e.at = doc["at"].get<std::int64_t>();
  e.kind = *kind;
  e.payload = doc["payload"];
  validate_payload(e.kind, e.payload);
  return e;
}

std::string canonical_line(const Event& event) { return to_json(event).dump(); }

}  // namespace arena
