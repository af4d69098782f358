#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "arena/errors.hpp"
#include "arena/fixtures.hpp"
#include "arena/store.hpp"
#include "support.hpp"

namespace arena {
namespace {

using testing::FakeClock;
using testing::TempDir;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << data;
}

template <typename Fn>
ErrorCode code_of(Fn fn) {
  try {
    fn();
  } catch (const ArenaError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kDomain;
}

TEST(EventLog, AppendAssignsGaplessSeq) {
  TempDir dir;
  const auto path = log_path(dir.path, "c");
  {
    EventLog log(path);
    EXPECT_EQ(log.append(EventKind::kCompetitionCreated,
                         {{"id", "c"}, {"name", "c"}, {"criteria", {"task-completion"}}}, 5),
              1);
    EXPECT_EQ(log.append(EventKind::kAgentRegistered, {{"agent", "A"}}, 6), 2);
  }
  const std::string data = read_file(path);
  EXPECT_EQ(std::count(data.begin(), data.end(), '\n'), 2);
  EXPECT_EQ(data.substr(0, data.find('\n')),
            R"({"at":5,"kind":"CompetitionCreated","payload":{"criteria":["task-completion"],"id":"c","name":"c"},"seq":1})");
  EventLog reopened(path);
  EXPECT_EQ(reopened.append(EventKind::kAgentRegistered, {{"agent", "B"}}, 7), 3);
  EXPECT_EQ(read_events(path).size(), 3u);
}

TEST(EventLog, RejectsBadAppends) {
  TempDir dir;
  EventLog log(log_path(dir.path, "c"));
  EXPECT_EQ(code_of([&] { log.append(EventKind::kAgentRegistered, {{"agent", 5}}, 1); }),
            ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([&] { log.append(EventKind::kAgentRegistered, {{"agent", "A"}, {"x", 1}}, 1); }),
            ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([&] {
              log.append(Event{5, 1, EventKind::kAgentRegistered, {{"agent", "A"}}});
            }),
            ErrorCode::kStorageFailure);
  EXPECT_EQ(log.last_seq(), 0);
}

TEST(EventLog, TornTailIsIgnoredAndTruncated) {
  TempDir dir;
  const auto path = log_path(dir.path, "c");
  {
    EventLog log(path);
    log.append(EventKind::kCompetitionCreated,
               {{"id", "c"}, {"name", "c"}, {"criteria", {"task-completion"}}}, 1);
  }
  const std::string good = read_file(path);
  write_file(path, good + R"({"at":2,"kind":"AgentRegis)");
  EXPECT_EQ(read_events(path).size(), 1u);
  EventLog log(path);
  EXPECT_EQ(read_file(path), good);
  EXPECT_EQ(log.append(EventKind::kAgentRegistered, {{"agent", "A"}}, 3), 2);
}

TEST(ReadEvents, CorruptionNamesTheRecord) {
  TempDir dir;
  const auto path = log_path(dir.path, "c");
  {
    EventLog log(path);
    log.append(EventKind::kCompetitionCreated,
               {{"id", "c"}, {"name", "c"}, {"criteria", {"task-completion"}}}, 1);
    log.append(EventKind::kAgentRegistered, {{"agent", "A"}}, 2);
    log.append(EventKind::kAgentRegistered, {{"agent", "B"}}, 3);
  }
  const std::string data = read_file(path);
  auto expect_bad_seq = [&](const std::string& corrupted, long long seq) {
    write_file(path, corrupted);
    try {
      read_events(path);
      ADD_FAILURE() << "accepted corrupted log";
    } catch (const CorruptLogError& e) {
      EXPECT_EQ(e.seq(), seq) << e.what();
    }
  };
  std::string s = data;
  s.replace(s.find("\"B\""), 3, "\"B");
  expect_bad_seq(s, 3);
  s = data;
  s.replace(s.find("\"seq\":2"), 7, "\"seq\":9");
  expect_bad_seq(s, 2);
  s = data;
  s.replace(s.find("{\"at\":2"), 7, "{ \"at\":2");
  expect_bad_seq(s, 2);
  // A semantic violation surfaces on replay.
  s = data;
  s.replace(s.find("\"B\""), 3, "\"A\"");
  write_file(path, s);
  try {
    replay_state(path);
    ADD_FAILURE();
  } catch (const CorruptLogError& e) {
    EXPECT_EQ(e.seq(), 3);
  }
}

TEST(Replay, EmptyAndSmallFixture) {
  TempDir dir;
  const auto path = log_path(dir.path, "c");
  EXPECT_EQ(replay_state(path).agents.size(), 0u);
  {
    EventLog log(path);
    log.append(EventKind::kCompetitionCreated,
               {{"id", "c"}, {"name", "c"}, {"criteria", {"task-completion"}}}, 1);
    log.append(EventKind::kAgentRegistered, {{"agent", "A"}}, 2);
    log.append(EventKind::kAgentRegistered, {{"agent", "B"}}, 3);
    log.append(EventKind::kTaskRegistered, {{"task", "FindCave"}}, 4);
    log.append(EventKind::kSeedRegistered, {{"task", "FindCave"}, {"seed", "s1"}}, 5);
  }
  const auto st = replay_state(path);
  EXPECT_EQ(st.agents, std::vector<AgentId>({"A", "B"}));
  EXPECT_EQ(st.tasks, std::vector<TaskId>({"FindCave"}));
  EXPECT_EQ(st.seeds.at("FindCave"), std::vector<SeedId>({"s1"}));
  EXPECT_TRUE(st.matches.empty());
  EXPECT_EQ(st.last_seq, 5);
}

TEST(Replay, LiveEqualsReplayAndSnapshotsAgree) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    TempDir dir;
    FakeClock clock;
    EventLog log(log_path(dir.path, "comp"));
    std::string previous;
    bool append_only = true;
    Competition comp(clock.fn(), [&](const Event& e) {
      log.append(e);
      const std::string now = read_file(log.path());
      append_only = append_only && now.compare(0, previous.size(), previous) == 0;
      previous = now;
    });
    comp.create(testing::basic_options(seed));
    testing::populate(comp, 3 + seed % 3, 1 + seed % 2, 2, 3);
    std::mt19937_64 rng(seed);
    testing::random_session(comp, clock, rng, 120);
    write_snapshot(dir.path, comp.state());
    testing::random_session(comp, clock, rng, 80);

    EXPECT_TRUE(append_only);
    const std::string live = canonical_state(comp.state());
    EXPECT_EQ(canonical_state(replay_state(log.path())), live);
    const Recovery rec = recover(dir.path, "comp");
    EXPECT_GT(rec.snapshot_seq, 0);
    EXPECT_EQ(canonical_state(rec.state), live);
    EXPECT_EQ(canonical_state(state_from_json(state_to_json(comp.state()))), live);
  }
}

TEST(Recover, IgnoresUnusableSnapshots) {
  TempDir dir;
  FakeClock clock;
  EventLog log(log_path(dir.path, "comp"));
  Competition comp(clock.fn(), [&](const Event& e) { log.append(e); });
  comp.create(testing::basic_options());
  testing::populate(comp, 3, 1, 1, 1);
  write_snapshot(dir.path, comp.state());
  const auto seq = comp.state().last_seq;
  write_file(snapshot_path(dir.path, "comp", seq), "{not json");
  write_file(snapshot_path(dir.path, "comp", seq + 50), "{}");
  const Recovery rec = recover(dir.path, "comp");
  EXPECT_EQ(rec.snapshot_seq, 0);
  EXPECT_EQ(canonical_state(rec.state), canonical_state(comp.state()));
}

// A child process drives verdicts and reports each acknowledged one on a
// pipe; it is SIGKILLed mid-run and the parent recovers from disk.
TEST(Recover, KillMidRunLosesNoAcknowledgedVerdict) {
  TempDir dir;
  int fds[2];
  ASSERT_EQ(::pipe(fds), 0);
  const pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    ::close(fds[0]);
    FakeClock clock;
    EventLog log(log_path(dir.path, "comp"));
    Competition comp(clock.fn(), [&](const Event& e) { log.append(e); });
    comp.create(testing::basic_options(3));
    testing::populate(comp, 6, 2, 50, 4);
    for (int i = 0;; ++i) {
      const JudgeId judge = "judge" + std::to_string(i % 4);
      try {
        const Match m = comp.next_match(Criterion::kTaskCompletion, judge);
        comp.submit_outcome({m.id, judge, VerdictOutcome::kFirstBetter});
        const std::uint64_t id = m.id;
        if (::write(fds[1], &id, sizeof id) != sizeof id) ::_exit(3);
      } catch (const ArenaError&) {
        ::_exit(0);
      }
    }
  }
  ::close(fds[1]);
  std::vector<std::uint64_t> acked;
  std::uint64_t id;
  while (acked.size() < 150 && ::read(fds[0], &id, sizeof id) == sizeof id) acked.push_back(id);
  ::kill(pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
  while (::read(fds[0], &id, sizeof id) == sizeof id) acked.push_back(id);
  ::close(fds[0]);
  ASSERT_GE(acked.size(), 150u);

  EventLog reopened(log_path(dir.path, "comp"));
  const Recovery rec = recover(dir.path, "comp");
  for (std::uint64_t m : acked) {
    ASSERT_TRUE(rec.state.matches.count(m));
    EXPECT_EQ(rec.state.matches.at(m).status, MatchStatus::kCompleted);
  }
  EXPECT_EQ(reopened.last_seq(), rec.state.last_seq);
}

TEST(Export, Table1Csv) {
  FakeClock clock;
  Competition comp(clock.fn());
  CreateOptions o;
  o.id = "basalt";
  comp.create(o);
  fixtures::import_table1(comp);
  const std::string csv = export_leaderboard(comp.state(), Criterion::kTaskCompletion,
                                             ExportFormat::kCsv);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "team,FindCave,MakeWaterfall,CreateVillageAnimalPen,BuildVillageHouse,average,rank");
  const auto& rows = fixtures::table1_rows();
  const json doc = json::parse(export_leaderboard(comp.state(), Criterion::kTaskCompletion,
                                                  ExportFormat::kJson));
  ASSERT_EQ(doc.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ASSERT_TRUE(std::getline(in, line));
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u);
    EXPECT_EQ(cells[0], rows[i].team);
    EXPECT_LE(std::abs(doc[i]["overall"].get<double>() - rows[i].average), 0.005 + 1e-9)
        << rows[i].team;
    EXPECT_EQ(cells[6], std::to_string(i + 1));
    // JSON carries full precision and agrees after rounding.
    EXPECT_EQ(doc[i]["agent"], cells[0]);
    EXPECT_EQ(format_2dp(doc[i]["overall"].get<double>()), cells[5]);
    EXPECT_EQ(format_2dp(doc[i]["per_task"]["FindCave"].get<double>()), cells[1]);
    EXPECT_EQ(doc[i]["rank"].get<int>(), std::stoi(cells[6]));
  }
}

TEST(Export, SingleAgentAndEmpty) {
  FakeClock clock;
  Competition comp(clock.fn());
  comp.create(testing::basic_options());
  EXPECT_EQ(code_of([&] {
              export_leaderboard(comp.state(), Criterion::kTaskCompletion, ExportFormat::kCsv);
            }),
            ErrorCode::kEmptyCompetition);
  comp.register_agent("solo");
  comp.register_task("t1");
  comp.register_task("t2");
  const std::string csv =
      export_leaderboard(comp.state(), Criterion::kTaskCompletion, ExportFormat::kCsv);
  EXPECT_EQ(csv, "team,t1,t2,average,rank\nsolo,0.00,0.00,0.00,1\n");
  EXPECT_EQ(code_of([] { export_format_from_string("xml"); }), ErrorCode::kSchemaViolation);
}

TEST(Store, ListsCompetitionsAndSnapshots) {
  TempDir dir;
  EventLog a(log_path(dir.path, "alpha"));
  EventLog b(log_path(dir.path, "beta"));
  write_file(dir.path / "notes.txt", "x");
  write_file(snapshot_path(dir.path, "alpha", 12), "{}");
  write_file(snapshot_path(dir.path, "alpha", 3), "{}");
  write_file(dir.path / "alpha.snapshot.x.json", "{}");
  EXPECT_EQ(list_competitions(dir.path), std::vector<std::string>({"alpha", "beta"}));
  EXPECT_EQ(list_snapshots(dir.path, "alpha"), std::vector<std::int64_t>({3, 12}));
}

}  // namespace
}  // namespace arena
