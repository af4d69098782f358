#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "arena/engine.hpp"
#include "arena/errors.hpp"
#include "support.hpp"

namespace arena {
namespace {

using testing::FakeClock;

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

struct Fixture {
  FakeClock clock;
  std::vector<Event> events;
  Competition comp{clock.fn(), [this](const Event& e) { events.push_back(e); }};

  explicit Fixture(CreateOptions o = testing::basic_options()) { comp.create(o); }
};

TEST(NextMatch, SingleCandidate) {
  Fixture f;
  f.comp.register_agent("A");
  f.comp.register_agent("B");
  f.comp.register_task("task");
  f.comp.register_seed("task", "s1");
  f.comp.register_judge("j", "tok");
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "j");
  EXPECT_EQ(std::set<AgentId>({m.first, m.second}), std::set<AgentId>({"A", "B"}));
  EXPECT_EQ(m.task, "task");
  EXPECT_EQ(m.seed, "s1");
  EXPECT_EQ(m.status, MatchStatus::kAssigned);
  EXPECT_EQ(m.judge, "j");
  EXPECT_EQ(m.deadline, f.clock.now + 60'000);
  EXPECT_EQ(f.events.back().kind, EventKind::kMatchAssigned);
  // Asking again returns the open assignment without new events.
  const auto n = f.events.size();
  EXPECT_EQ(f.comp.next_match(Criterion::kTaskCompletion, "j").id, m.id);
  EXPECT_EQ(f.events.size(), n);
}

TEST(NextMatch, Errors) {
  Fixture f;
  f.comp.register_judge("j", "tok");
  EXPECT_EQ(code_of([&] { f.comp.next_match(Criterion::kTaskCompletion, "j"); }),
            ErrorCode::kNoMatchAvailable);
  EXPECT_EQ(code_of([&] { f.comp.next_match(Criterion::kTaskCompletion, "nobody"); }),
            ErrorCode::kUnknownJudge);
  f.comp.update_config({{"revoked_judges", {"j"}}});
  EXPECT_EQ(code_of([&] { f.comp.next_match(Criterion::kTaskCompletion, "j"); }),
            ErrorCode::kUnknownJudge);
  Competition bare(f.clock.fn());
  EXPECT_EQ(code_of([&] { bare.next_match(Criterion::kTaskCompletion, "j"); }),
            ErrorCode::kNotFound);
}

TEST(NextMatch, JudgeExhaustion) {
  Fixture f;
  testing::populate(f.comp, 3, 1, 2, 1);
  std::set<std::tuple<PairKey, TaskId, SeedId>> seen;
  for (int i = 0; i < 6; ++i) {
    const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
    PairKey pk = std::minmax(m.first, m.second);
    EXPECT_TRUE(seen.insert({pk, m.task, m.seed}).second);
    f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter});
  }
  EXPECT_EQ(code_of([&] { f.comp.next_match(Criterion::kTaskCompletion, "judge0"); }),
            ErrorCode::kNoMatchAvailable);
  // The other criterion is a separate pool.
  EXPECT_NO_THROW(f.comp.next_match(Criterion::kHumanLikeness, "judge0"));
}

// Brute force over every pair as the oracle for the greedy argmax.
TEST(NextMatch, GreedyMaximizesQualityTimesUncertainty) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> mean(15, 35), dev(0.5, 8.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + trial % 8;
    FakeClock clock;
    Competition comp(clock.fn());
    CreateOptions o = testing::basic_options(trial);
    o.engine.policy = SchedulerPolicy::uncertainty_greedy(1000);
    comp.create(o);
    testing::populate(comp, n, 1, 1, 1);
    CompetitionState st = comp.state();
    for (const auto& a : st.agents) {
      st.ratings[Criterion::kTaskCompletion]["task0"][a] = {mean(rng), dev(rng)};
    }
    if (trial % 5 == 0) {
      // Exact tie in the product: identical beliefs everywhere.
      for (const auto& a : st.agents) st.ratings[Criterion::kTaskCompletion]["task0"][a] = {25, 3};
    }
    Competition seeded = Competition::restore(st, {}, clock.fn());
    double best = -1;
    PairKey best_pair;
    for (std::size_t i = 0; i < st.agents.size(); ++i) {
      for (std::size_t j = 0; j < st.agents.size(); ++j) {
        if (st.agents[i] >= st.agents[j]) continue;
        const Gaussian a = st.rating_of(Criterion::kTaskCompletion, "task0", st.agents[i]);
        const Gaussian b = st.rating_of(Criterion::kTaskCompletion, "task0", st.agents[j]);
        const double score = match_quality(a, b, st.rating) * (a.dev + b.dev);
        const PairKey pk{st.agents[i], st.agents[j]};
        if (score > best || (score == best && pk < best_pair)) {
          best = score;
          best_pair = pk;
        }
      }
    }
    const Match m = seeded.next_match(Criterion::kTaskCompletion, "judge0");
    EXPECT_EQ(PairKey(std::minmax(m.first, m.second)), best_pair) << "trial " << trial;
  }
}

TEST(NextMatch, TasksServedByCompletedCount) {
  Fixture f;
  testing::populate(f.comp, 4, 3, 3, 3);
  std::map<TaskId, int> served;
  for (int i = 0; i < 30; ++i) {
    const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge" + std::to_string(i % 3));
    f.comp.submit_outcome({m.id, m.judge, VerdictOutcome::kSecondBetter});
    ++served[m.task];
  }
  for (const auto& [t, n] : served) EXPECT_EQ(n, 10) << t;
}

TEST(NextMatch, SidesAreBalanced) {
  Fixture f;
  testing::populate(f.comp, 2, 1, 100, 1);
  CompetitionState st = f.comp.state();
  st.ratings[Criterion::kTaskCompletion]["task0"]["agent0"] = {35, 2};
  st.ratings[Criterion::kTaskCompletion]["task0"]["agent1"] = {15, 2};
  Competition comp = Competition::restore(st, {}, f.clock.fn());
  int stronger_first = 0;
  for (int i = 0; i < 100; ++i) {
    const Match m = comp.next_match(Criterion::kTaskCompletion, "judge0");
    stronger_first += m.first == "agent0";
    comp.submit_outcome({m.id, "judge0", VerdictOutcome::kSkip});
  }
  EXPECT_GE(stronger_first, 40);
  EXPECT_LE(stronger_first, 60);
}

TEST(SubmitOutcome, FreshPairMovesLikeRatingCore) {
  CreateOptions o = testing::basic_options();
  o.rating.tau = 0.0;
  o.rating.p_draw = 0.0;
  Fixture f(o);
  testing::populate(f.comp, 2, 1, 1, 1);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  const auto r = f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter});
  EXPECT_TRUE(r.applied);
  EXPECT_EQ(r.judge_completed, 1);
  const auto& st = f.comp.state();
  const Gaussian w = st.rating_of(Criterion::kTaskCompletion, "task0", m.first);
  const Gaussian l = st.rating_of(Criterion::kTaskCompletion, "task0", m.second);
  EXPECT_NEAR(w.mean, 29.2052208700336001, 1e-10);
  EXPECT_NEAR(w.dev, 7.19448134883108138, 1e-10);
  EXPECT_NEAR(l.mean, 20.7947791299663999, 1e-10);
  // The other criterion is untouched.
  EXPECT_EQ(st.rating_of(Criterion::kHumanLikeness, "task0", m.first), o.rating.prior());
  // Draws are rejected when the competition disables them.
  EXPECT_EQ(code_of([&] {
              const Match m2 = f.comp.next_match(Criterion::kHumanLikeness, "judge0");
              f.comp.submit_outcome({m2.id, "judge0", VerdictOutcome::kDraw});
            }),
            ErrorCode::kDomain);
}

TEST(SubmitOutcome, IdempotenceAndConflicts) {
  Fixture f;
  testing::populate(f.comp, 3, 1, 1, 2);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kDraw});
  const auto n = f.events.size();
  const auto before = state_to_json(f.comp.state()).dump();
  const auto again = f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kDraw});
  EXPECT_FALSE(again.applied);
  EXPECT_EQ(again.judge_completed, 1);
  EXPECT_EQ(f.events.size(), n);
  EXPECT_EQ(state_to_json(f.comp.state()).dump(), before);

  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter}); }),
            ErrorCode::kAlreadyCompleted);
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({999, "judge0", VerdictOutcome::kDraw}); }),
            ErrorCode::kUnknownMatch);
  const Match m2 = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m2.id, "judge1", VerdictOutcome::kDraw}); }),
            ErrorCode::kNotAssignedToJudge);
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m2.id, "ghost", VerdictOutcome::kDraw}); }),
            ErrorCode::kUnknownJudge);
}

TEST(SubmitOutcome, SkipRequeuesForAnotherJudge) {
  Fixture f;
  testing::populate(f.comp, 2, 1, 1, 2);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  const auto updates = f.comp.state().rating_updates;
  f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kSkip});
  EXPECT_EQ(f.comp.state().matches.at(m.id).status, MatchStatus::kPending);
  EXPECT_EQ(f.comp.state().rating_updates, updates);
  EXPECT_EQ(code_of([&] { f.comp.next_match(Criterion::kTaskCompletion, "judge0"); }),
            ErrorCode::kNoMatchAvailable);
  const Match again = f.comp.next_match(Criterion::kTaskCompletion, "judge1");
  EXPECT_EQ(again.id, m.id);
  f.comp.submit_outcome({m.id, "judge1", VerdictOutcome::kFirstBetter});
  EXPECT_EQ(f.comp.state().matches.at(m.id).status, MatchStatus::kCompleted);
  EXPECT_EQ(f.comp.state().matches.at(m.id).verdicts.size(), 2u);
}

TEST(SubmitOutcome, ExpiryAndGrace) {
  CreateOptions o = testing::basic_options();
  o.engine.grace_ms = 5'000;
  Fixture f(o);
  testing::populate(f.comp, 2, 1, 1, 2);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  f.clock.now = m.deadline + 4'000;  // inside grace
  EXPECT_TRUE(f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kSkip}).applied);

  const Match m2 = f.comp.next_match(Criterion::kTaskCompletion, "judge1");
  f.clock.now = m2.deadline + 5'001;
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m2.id, "judge1", VerdictOutcome::kDraw}); }),
            ErrorCode::kMatchExpired);
  EXPECT_EQ(f.comp.expire_overdue(), 1);
  EXPECT_EQ(f.comp.state().matches.at(m2.id).status, MatchStatus::kExpired);
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m2.id, "judge1", VerdictOutcome::kDraw}); }),
            ErrorCode::kMatchExpired);
}

TEST(SubmitOutcome, ExpiredMatchesAreEventuallyCompleted) {
  Fixture f;
  testing::populate(f.comp, 2, 1, 1, 3);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  f.clock.now = m.deadline + 1;
  const Match r = f.comp.next_match(Criterion::kTaskCompletion, "judge1");
  EXPECT_EQ(r.id, m.id);
  EXPECT_EQ(code_of([&] { f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kDraw}); }),
            ErrorCode::kMatchExpired);
  f.comp.submit_outcome({m.id, "judge1", VerdictOutcome::kSecondBetter});
  EXPECT_EQ(f.comp.state().matches.at(m.id).status, MatchStatus::kCompleted);
}

TEST(Engine, RandomSessionsKeepInvariants) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Fixture f(testing::basic_options(seed));
    testing::populate(f.comp, 4, 2, 2, 3);
    std::mt19937_64 rng(seed);
    const int accepted = testing::random_session(f.comp, f.clock, rng, 300);
    const auto& st = f.comp.state();

    long completed = 0;
    std::set<std::tuple<JudgeId, PairKey, TaskId, SeedId, Criterion>> judged;
    for (const auto& [id, m] : st.matches) {
      EXPECT_NE(m.first, m.second);
      if (m.status == MatchStatus::kCompleted) {
        ++completed;
        EXPECT_NE(m.verdicts.back().outcome, VerdictOutcome::kSkip);
      }
      for (const auto& v : m.verdicts) {
        EXPECT_TRUE(judged.insert({v.judge, std::minmax(m.first, m.second), m.task, m.seed,
                                   m.criterion})
                        .second);
      }
    }
    EXPECT_EQ(st.rating_updates, completed);
    EXPECT_EQ(completed, accepted);

    long verdict_events = 0;
    for (const auto& e : f.events) {
      if (e.kind == EventKind::kVerdictSubmitted && e.payload.at("outcome") != "skip") {
        ++verdict_events;
      }
    }
    long covered = 0;
    for (auto crit : st.criteria) {
      for (const auto& [key, n] : f.comp.coverage_report(crit)) covered += n;
    }
    EXPECT_EQ(covered, verdict_events);
    EXPECT_EQ(covered, completed);
  }
}

TEST(Coverage, Counts) {
  Fixture f;
  EXPECT_TRUE(f.comp.coverage_report(Criterion::kTaskCompletion).empty());
  testing::populate(f.comp, 2, 1, 3, 1);
  for (int i = 0; i < 3; ++i) {
    const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
    f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter});
  }
  const auto cov = f.comp.coverage_report(Criterion::kTaskCompletion);
  ASSERT_EQ(cov.size(), 1u);
  EXPECT_EQ(cov.begin()->second, 3);
}

TEST(Stability, Rule) {
  StabilityConfig cfg;
  const Ranking r{"a", "b", "c"};
  auto rep = evaluate_stability({{50, r}, {100, r}}, 0.5, 1000, 3, cfg);
  EXPECT_FALSE(rep.stable);
  rep = evaluate_stability({{50, r}, {100, r}, {150, r}}, 0.5, 150, 3, cfg);
  EXPECT_TRUE(rep.stable);
  EXPECT_EQ(rep.tau_window, std::vector<double>({1.0, 1.0}));
  EXPECT_EQ(rep.min_comparisons, 30);
  rep = evaluate_stability({{50, r}, {100, r}, {150, r}}, 2.0, 150, 3, cfg);
  EXPECT_FALSE(rep.stable);
  rep = evaluate_stability({{50, r}, {100, r}, {150, r}}, 0.5, 20, 3, cfg);
  EXPECT_FALSE(rep.stable);
  rep = evaluate_stability({{50, r}, {100, {"b", "a", "c"}}, {150, r}}, 0.5, 150, 3, cfg);
  EXPECT_FALSE(rep.stable);
  cfg.window = 0;
  EXPECT_EQ(code_of([&] { evaluate_stability({}, 0.5, 0, 3, cfg); }), ErrorCode::kDomain);
}

TEST(Stability, CheckpointsFollowCadence) {
  Fixture f;
  testing::populate(f.comp, 3, 1, 10, 4);
  for (int i = 0; i < 25; ++i) {
    const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge" + std::to_string(i % 4));
    f.comp.submit_outcome({m.id, m.judge, VerdictOutcome::kFirstBetter});
  }
  const auto cps = f.comp.checkpoints(Criterion::kTaskCompletion, 10);
  ASSERT_EQ(cps.size(), 2u);
  EXPECT_EQ(cps[0].completed, 10);
  EXPECT_EQ(cps[1].completed, 20);
  StabilityConfig cfg;
  cfg.cadence = 10;
  const auto rep = f.comp.check_stability(Criterion::kTaskCompletion, cfg);
  EXPECT_FALSE(rep.stable);
  EXPECT_EQ(rep.completed, 25);
  EXPECT_EQ(rep.checkpoints, 2);
}

TEST(Config, RatingFrozenAfterFirstUpdate) {
  Fixture f;
  testing::populate(f.comp, 2, 1, 1, 1);
  f.comp.update_config({{"rating", {{"beta", 3.0}}}});
  EXPECT_EQ(f.comp.state().rating.beta, 3.0);
  const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
  f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter});
  const auto n = f.events.size();
  EXPECT_EQ(code_of([&] { f.comp.update_config({{"rating", {{"beta", 4.0}}}}); }),
            ErrorCode::kDomain);
  EXPECT_EQ(f.events.size(), n);
  EXPECT_EQ(code_of([&] { f.comp.update_config({{"bogus", 1}}); }), ErrorCode::kSchemaViolation);
}

TEST(Leaderboard, HumanLikenessWithoutVerdictsSitsAtPrior) {
  Fixture f;
  testing::populate(f.comp, 3, 2, 2, 1);
  for (int i = 0; i < 4; ++i) {
    const Match m = f.comp.next_match(Criterion::kTaskCompletion, "judge0");
    f.comp.submit_outcome({m.id, "judge0", VerdictOutcome::kFirstBetter});
  }
  for (const auto& row : f.comp.leaderboard(Criterion::kHumanLikeness)) {
    EXPECT_EQ(row.overall, 0.0);
    for (const auto& [t, v] : row.per_task) EXPECT_EQ(v, 0.0);
  }
  Fixture empty;
  EXPECT_TRUE(empty.comp.leaderboard(Criterion::kTaskCompletion).empty());
}

}  // namespace
}  // namespace arena
