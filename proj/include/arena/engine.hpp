#pragma once

// Competition state and the match lifecycle. All state is a fold over
// events; commands validate, emit events through the sink, and then apply
// them, so nothing is acknowledged before it has been persisted.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "arena/event.hpp"
#include "arena/rating.hpp"
#include "arena/scoring.hpp"

namespace arena {

using MatchId = std::uint64_t;
using JudgeId = std::string;
using SeedId = std::string;

enum class Criterion { kTaskCompletion, kHumanLikeness };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

enum class MatchStatus { kPending, kAssigned, kCompleted, kExpired };

std::string to_string(MatchStatus s);

enum class VerdictOutcome { kFirstBetter, kSecondBetter, kDraw, kSkip };

std::string to_string(VerdictOutcome o);
VerdictOutcome verdict_outcome_from_string(const std::string& name);

struct VerdictRecord {
  JudgeId judge;
  VerdictOutcome outcome = VerdictOutcome::kSkip;
  std::int64_t at = 0;
};

struct Match {
  MatchId id = 0;
  TaskId task;
  SeedId seed;
  AgentId first;
  AgentId second;
  Criterion criterion = Criterion::kTaskCompletion;
  MatchStatus status = MatchStatus::kPending;
  JudgeId judge;              // current or last assignee
  std::int64_t deadline = 0;  // meaningful while assigned
  std::vector<VerdictRecord> verdicts;
  std::set<JudgeId> past_assignees;
  std::int64_t completed_seq = 0;
};

struct Verdict {
  MatchId match = 0;
  JudgeId judge;
  VerdictOutcome outcome = VerdictOutcome::kSkip;
};

struct VideoRef {
  AgentId agent;
  TaskId task;
  SeedId seed;
  std::string uri;
  std::optional<double> duration_s;
};

struct SchedulerPolicy {
  enum class Kind { kUniformRandom, kRoundRobinPairs, kUncertaintyGreedy };
  Kind kind = Kind::kUncertaintyGreedy;
  int candidate_pool = 32;

  static SchedulerPolicy uniform_random() { return {Kind::kUniformRandom, 1}; }
  static SchedulerPolicy round_robin_pairs() { return {Kind::kRoundRobinPairs, 1}; }
  static SchedulerPolicy uncertainty_greedy(int pool = 32) {
    return {Kind::kUncertaintyGreedy, pool};
  }
};

std::string to_string(SchedulerPolicy::Kind k);
SchedulerPolicy policy_from_string(const std::string& name, int candidate_pool = 32);

struct StabilityConfig {
  int cadence = 50;             // completed comparisons between checkpoints
  int window = 3;               // checkpoints compared
  double tau_min = 0.95;
  double sigma_stop = 0.8;
  long min_comparisons = -1;    // negative: 10 x number of agents

  bool operator==(const StabilityConfig&) const = default;
};

struct EngineConfig {
  std::int64_t deadline_ms = 30 * 60 * 1000;
  std::int64_t grace_ms = 0;
  SchedulerPolicy policy;
  StabilityConfig stability;
  ScoreOptions score;
};

struct StabilityReport {
  bool stable = false;
  std::vector<double> tau_window;
  double max_dev = 0.0;
  long completed = 0;
  long checkpoints = 0;
  long min_comparisons = 0;
};

struct Checkpoint {
  long completed = 0;
  Ranking ranking;
};

/// Stability rule on prepared inputs: the last `window` checkpoints must
/// agree pairwise-consecutively with tau >= tau_min, every deviation must be
/// at most sigma_stop and the comparison floor must be met.
StabilityReport evaluate_stability(const std::vector<Checkpoint>& checkpoints,
                                   double max_dev, long completed,
                                   std::size_t n_agents,
                                   const StabilityConfig& cfg);

struct JudgeInfo {
  std::string token;
  bool revoked = false;
};

using PairKey = std::pair<AgentId, AgentId>;  // ordered: first < second
using CoverageKey = std::pair<PairKey, TaskId>;

struct CompetitionState {
  std::string id;
  std::string name;
  std::vector<Criterion> criteria;
  RatingConfig rating;
  EngineConfig engine;
  std::uint64_t rng_seed = 0;

  std::vector<AgentId> agents;  // registration order
  std::vector<TaskId> tasks;
  std::map<TaskId, std::string> task_descriptions;
  std::map<TaskId, std::vector<SeedId>> seeds;
  std::map<std::tuple<AgentId, TaskId, SeedId>, VideoRef> videos;
  std::map<JudgeId, JudgeInfo> judges;
  std::map<MatchId, Match> matches;
  // criterion -> task -> agent; absent entries sit at the prior.
  std::map<Criterion, std::map<TaskId, std::map<AgentId, Gaussian>>> ratings;
  // Injected normalized scores that bypass rating for a criterion.
  std::map<Criterion, std::map<AgentId, std::map<TaskId, double>>> normalized_override;

  std::int64_t last_seq = 0;
  std::int64_t last_at = 0;
  MatchId next_match_id = 1;
  long rating_updates = 0;

  // Indexes derived from the fields above.
  std::map<Criterion, std::vector<MatchId>> completion_order;
  std::map<Criterion, std::map<TaskId, long>> completed_per_task;
  std::set<std::tuple<JudgeId, PairKey, TaskId, SeedId, Criterion>> seen;
  std::map<std::tuple<PairKey, TaskId, SeedId, Criterion>, long> seed_usage;
  std::map<JudgeId, long> judge_completed;

  bool created() const { return !id.empty(); }
  bool has_agent(const AgentId& a) const;
  bool has_task(const TaskId& t) const;
  bool has_criterion(Criterion c) const;
  Gaussian rating_of(Criterion c, const TaskId& task, const AgentId& agent) const;

  /// Recomputes the derived indexes from matches.
  void rebuild_indexes();
};

/// Canonical full-state document; equal states serialize byte-identically.
json state_to_json(const CompetitionState& state);
CompetitionState state_from_json(const json& doc);

/// Folds one event into the state. Throws CorruptLogError on a sequence gap
/// or an event that does not fit the current state.
void apply_event(CompetitionState& state, const Event& event);

using EventSink = std::function<void(const Event&)>;
using Clock = std::function<std::int64_t()>;

struct SubmitResult {
  bool applied = false;  // false for an idempotent redelivery
  long judge_completed = 0;
};

struct CreateOptions {
  std::string id;
  std::string name;
  std::vector<Criterion> criteria{Criterion::kTaskCompletion};
  RatingConfig rating;
  EngineConfig engine;
  std::uint64_t rng_seed = 0;
};

json engine_config_to_json(const EngineConfig& cfg);
EngineConfig engine_config_from_json(const json& doc, EngineConfig base = {});
json rating_config_to_json(const RatingConfig& cfg);
RatingConfig rating_config_from_json(const json& doc, RatingConfig base = {});

class Competition {
 public:
  explicit Competition(Clock clock, EventSink sink = {});

  /// Rebuilds a competition from stored state plus the remaining events.
  static Competition restore(CompetitionState state, const std::vector<Event>& tail,
                             Clock clock, EventSink sink = {});

  const CompetitionState& state() const { return state_; }
  void apply(const Event& event) { apply_event(state_, event); }

  void create(const CreateOptions& options);
  void register_agent(const AgentId& agent);
  void register_task(const TaskId& task, const std::string& description = {});
  void register_seed(const TaskId& task, const SeedId& seed);
  void register_video(const VideoRef& video);
  void register_judge(const JudgeId& judge, const std::string& token);
  void update_config(const json& patch);

  /// Assigns a match to the judge: their open assignment if any, else an
  /// abandoned match, else a newly scheduled one.
  Match next_match(Criterion criterion, const SchedulerPolicy& policy,
                   const JudgeId& judge);
  Match next_match(Criterion criterion, const JudgeId& judge) {
    return next_match(criterion, state_.engine.policy, judge);
  }

  SubmitResult submit_outcome(const Verdict& verdict);

  /// Expires assignments whose deadline plus grace has passed.
  int expire_overdue();

  StabilityReport check_stability(Criterion criterion,
                                  const StabilityConfig& cfg) const;
  StabilityReport check_stability(Criterion criterion) const {
    return check_stability(criterion, state_.engine.stability);
  }

  std::map<CoverageKey, long> coverage_report(Criterion criterion) const;

  std::vector<LeaderboardRow> leaderboard(Criterion criterion) const;

  /// Checkpoint rankings at every `cadence` completed comparisons.
  std::vector<Checkpoint> checkpoints(Criterion criterion, int cadence) const;

 private:
  Event emit(EventKind kind, json payload);
  void require_created() const;

  CompetitionState state_;
  Clock clock_;
  EventSink sink_;
};

/// Leaderboard of a state without a Competition wrapper.
std::vector<LeaderboardRow> leaderboard_of(const CompetitionState& state,
                                           Criterion criterion);

/// Checkpoint rankings recomputed by replaying completed matches in order.
std::vector<Checkpoint> checkpoints_of(const CompetitionState& state, Criterion criterion,
                                       int cadence);

StabilityReport stability_of(const CompetitionState& state, Criterion criterion,
                             const StabilityConfig& cfg);

}  // namespace arena
