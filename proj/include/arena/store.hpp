#pragma once

// Event-sourced persistence: `<id>.events.jsonl` is the source of truth,
// `<id>.snapshot.<seq>.json` files only shorten recovery.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arena/engine.hpp"
#include "arena/event.hpp"

namespace arena {

namespace fs = std::filesystem;

fs::path log_path(const fs::path& dir, const std::string& competition_id);
fs::path snapshot_path(const fs::path& dir, const std::string& competition_id,
                       std::int64_t seq);

/// Single writer over one log file. Opening repairs a torn final line (a
/// write that never completed and so was never acknowledged).
class EventLog {
 public:
  explicit EventLog(fs::path path);
  ~EventLog();
  EventLog(EventLog&& other) noexcept;
  EventLog& operator=(EventLog&& other) noexcept;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  const fs::path& path() const { return path_; }
  std::int64_t last_seq() const { return last_seq_; }

  /// Writes one line and fsyncs before returning. The event must carry
  /// seq = last_seq() + 1.
  void append(const Event& event);
  std::int64_t append(EventKind kind, const json& payload, std::int64_t at);

 private:
  fs::path path_;
  int fd_ = -1;
  std::int64_t last_seq_ = 0;
};

/// Reads and validates every complete line. Throws CorruptLogError naming
/// the first bad record; an unterminated final line is ignored.
std::vector<Event> read_events(const fs::path& path);

CompetitionState replay_state(const std::vector<Event>& events);
CompetitionState replay_state(const fs::path& log);

/// Canonical serialization used for equality and hashing.
std::string canonical_state(const CompetitionState& state);

void write_snapshot(const fs::path& dir, const CompetitionState& state);
std::vector<std::int64_t> list_snapshots(const fs::path& dir, const std::string& id);
CompetitionState read_snapshot(const fs::path& file);

struct Recovery {
  CompetitionState state;
  std::int64_t snapshot_seq = 0;  // 0 when no snapshot was used
  std::size_t replayed = 0;
};

/// Latest usable snapshot plus the remaining log events.
Recovery recover(const fs::path& dir, const std::string& id);

/// Competition ids with an event log in `dir`, sorted.
std::vector<std::string> list_competitions(const fs::path& dir);

enum class ExportFormat { kCsv, kJson };

ExportFormat export_format_from_string(const std::string& name);

/// CSV: `team,<task...>,average,rank`, two decimals, rank order.
/// JSON: array of rows at full precision. Throws EmptyCompetition.
std::string export_leaderboard(const CompetitionState& state, Criterion criterion,
                               ExportFormat format);

json rows_to_json(const std::vector<LeaderboardRow>& rows);

}  // namespace arena
