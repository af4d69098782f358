#include "arena/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "arena/errors.hpp"

namespace arena {

namespace {

constexpr const char* kLogSuffix = ".events.jsonl";

[[noreturn]] void storage_failure(const std::string& what) {
  throw ArenaError(ErrorCode::kStorageFailure, what + ": " + std::strerror(errno));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArenaError(ErrorCode::kStorageFailure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(int fd, const std::string& data, const std::string& what) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure(what);
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

fs::path log_path(const fs::path& dir, const std::string& id) {
  return dir / (id + kLogSuffix);
}

fs::path snapshot_path(const fs::path& dir, const std::string& id, std::int64_t seq) {
  return dir / (id + ".snapshot." + std::to_string(seq) + ".json");
}

std::vector<Event> read_events(const fs::path& path) {
  std::vector<Event> events;
  if (!fs::exists(path)) return events;
  const std::string data = slurp(path);
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail, never acknowledged
    const std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    const std::int64_t expected = static_cast<std::int64_t>(events.size()) + 1;
    Event e;
    try {
      e = event_from_json(json::parse(line));
    } catch (const json::exception& ex) {
      throw CorruptLogError(expected, ex.what());
    } catch (const ArenaError& ex) {
      throw CorruptLogError(expected, ex.what());
    }
    if (e.seq != expected) {
      throw CorruptLogError(expected, "found seq " + std::to_string(e.seq));
    }
    if (canonical_line(e) != line) {
      throw CorruptLogError(expected, "record is not in canonical form");
    }
    events.push_back(std::move(e));
  }
  return events;
}

EventLog::EventLog(fs::path path) : path_(std::move(path)) {
  if (fs::exists(path_)) {
    const std::string data = slurp(path_);
    const std::size_t keep = data.empty() || data.back() == '\n'
                                 ? data.size()
                                 : data.rfind('\n') == std::string::npos ? 0
                                                                         : data.rfind('\n') + 1;
    if (keep != data.size()) {
      std::cerr << "warning: dropping unterminated final record of " << path_ << "\n";
      fs::resize_file(path_, keep);
    }
    const auto events = read_events(path_);
    last_seq_ = events.empty() ? 0 : events.back().seq;
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_failure("open " + path_.string());
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

EventLog::EventLog(EventLog&& other) noexcept
    : path_(std::move(other.path_)), fd_(other.fd_), last_seq_(other.last_seq_) {
  other.fd_ = -1;
}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = other.fd_;
    last_seq_ = other.last_seq_;
    other.fd_ = -1;
  }
  return *this;
}

void EventLog::append(const Event& event) {
  if (event.seq != last_seq_ + 1) {
    throw ArenaError(ErrorCode::kStorageFailure,
                     "append out of order: seq " + std::to_string(event.seq) +
                         " after " + std::to_string(last_seq_));
  }
  validate_payload(event.kind, event.payload);
  // One write() per line keeps appends atomic at line granularity.
  write_all(fd_, canonical_line(event) + "\n", "append " + path_.string());
  if (::fsync(fd_) != 0) storage_failure("fsync " + path_.string());
  last_seq_ = event.seq;
}

std::int64_t EventLog::append(EventKind kind, const json& payload, std::int64_t at) {
  append(Event{last_seq_ + 1, at, kind, payload});
  return last_seq_;
}

CompetitionState replay_state(const std::vector<Event>& events) {
  CompetitionState state;
  for (const auto& e : events) apply_event(state, e);
  return state;
}

CompetitionState replay_state(const fs::path& log) { return replay_state(read_events(log)); }

std::string canonical_state(const CompetitionState& state) {
  return state_to_json(state).dump();
}

void write_snapshot(const fs::path& dir, const CompetitionState& state) {
  const fs::path target = snapshot_path(dir, state.id, state.last_seq);
  const fs::path tmp = target.string() + ".tmp";
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) storage_failure("open " + tmp.string());
    try {
      write_all(fd, canonical_state(state) + "\n", "snapshot " + tmp.string());
    } catch (...) {
      ::close(fd);
      throw;
    }
    if (::fsync(fd) != 0) {
      ::close(fd);
      storage_failure("fsync " + tmp.string());
    }
    ::close(fd);
  }
  fs::rename(tmp, target);
}

std::vector<std::int64_t> list_snapshots(const fs::path& dir, const std::string& id) {
  std::vector<std::int64_t> seqs;
  if (!fs::is_directory(dir)) return seqs;
  const std::string prefix = id + ".snapshot.";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) != 0 || name.size() <= prefix.size() + 5) continue;
    if (name.substr(name.size() - 5) != ".json") continue;
    const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    seqs.push_back(std::stoll(digits));
  }
  std::sort(seqs.begin(), seqs.end());
  return seqs;
}

CompetitionState read_snapshot(const fs::path& file) {
  try {
    return state_from_json(json::parse(slurp(file)));
  } catch (const json::exception& e) {
    throw ArenaError(ErrorCode::kSchemaViolation,
                     "snapshot " + file.string() + ": " + e.what());
  }
}

Recovery recover(const fs::path& dir, const std::string& id) {
  const auto events = read_events(log_path(dir, id));
  Recovery r;
  auto seqs = list_snapshots(dir, id);
  for (auto it = seqs.rbegin(); it != seqs.rend(); ++it) {
    if (*it > static_cast<std::int64_t>(events.size())) continue;
    try {
      r.state = read_snapshot(snapshot_path(dir, id, *it));
    } catch (const ArenaError& e) {
      std::cerr << "warning: ignoring snapshot: " << e.what() << "\n";
      continue;
    }
    if (r.state.last_seq != *it) continue;
    r.snapshot_seq = *it;
    break;
  }
  if (r.snapshot_seq == 0) r.state = CompetitionState{};
  for (std::size_t i = static_cast<std::size_t>(r.snapshot_seq); i < events.size(); ++i) {
    apply_event(r.state, events[i]);
    ++r.replayed;
  }
  return r;
}

std::vector<std::string> list_competitions(const fs::path& dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  const std::string suffix = kLogSuffix;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

ExportFormat export_format_from_string(const std::string& name) {
  if (name == "csv") return ExportFormat::kCsv;
  if (name == "json") return ExportFormat::kJson;
  throw ArenaError(ErrorCode::kSchemaViolation, "unknown export format '" + name + "'");
}

json rows_to_json(const std::vector<LeaderboardRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back({{"agent", row.agent},
                   {"per_task", row.per_task},
                   {"overall", row.overall},
                   {"rank", row.rank}});
  }
  return out;
}

std::string export_leaderboard(const CompetitionState& state, Criterion criterion,
                               ExportFormat format) {
  const auto rows = leaderboard_of(state, criterion);
  if (rows.empty()) {
    throw ArenaError(ErrorCode::kEmptyCompetition, "competition has no agents to export");
  }
  if (format == ExportFormat::kJson) return rows_to_json(rows).dump(2) + "\n";
  std::string out = "team";
  for (const auto& task : state.tasks) out += "," + csv_field(task);
  out += ",average,rank\n";
  for (const auto& row : rows) {
    out += csv_field(row.agent);
    for (const auto& task : state.tasks) out += "," + format_2dp(row.per_task.at(task));
    out += "," + format_2dp(row.overall) + "," + std::to_string(row.rank) + "\n";
  }
  return out;
}

}  // namespace arena
