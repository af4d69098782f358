#pragma once

// Synthetic-judge harness: Thurstone comparators with ground-truth skills
// drive the full engine so ranking recovery can be measured.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "arena/engine.hpp"

namespace arena::sim {

struct SimConfig {
  int n_agents = 11;
  std::vector<TaskId> tasks{"task-1", "task-2", "task-3", "task-4"};
  int seeds_per_task = 5;
  // (agent, task) -> skill. When empty, drawn uniformly on [skill_lo, skill_hi].
  std::map<std::pair<AgentId, TaskId>, double> true_skill;
  double skill_lo = 20.0;
  double skill_hi = 30.0;
  double judge_noise = 25.0 / 6.0;
  double draw_band = 0.0;
  double flip_rate = 0.05;
  long budget = 3000;
  SchedulerPolicy policy = SchedulerPolicy::uncertainty_greedy(32);
  std::uint64_t rng_seed = 1;
  int n_judges = 20;
  RatingConfig rating;
  StabilityConfig stability;
  bool stop_on_stability = false;

  void validate() const;
};

struct TrajectoryPoint {
  long comparisons = 0;
  double tau = 0.0;      // vs ground truth
  double max_dev = 0.0;
  bool stable = false;   // stability gate at this checkpoint
};

struct SimReport {
  long comparisons_used = 0;
  std::vector<TrajectoryPoint> tau_trajectory;
  std::optional<double> final_tau;   // absent when no comparison happened
  std::optional<long> stabilized_at;
  double final_max_dev = 0.0;
  bool no_signal = false;            // ground truth has no strict ordering
  Ranking truth;
  Ranking final_ranking;
};

std::string agent_name(int index);

/// Ground-truth skills: cfg.true_skill, or a uniform draw from rng_seed.
std::map<std::pair<AgentId, TaskId>, double> resolve_truth(const SimConfig& cfg);

/// Ranking by mean of per-task skills normalized with the clamped formula.
Ranking truth_ranking(const SimConfig& cfg,
                      const std::map<std::pair<AgentId, TaskId>, double>& truth);

/// One Thurstone judgement: perceived performances N(skill, noise^2), draw
/// inside the band, otherwise the larger wins, then a flip with flip_rate.
VerdictOutcome simulated_judge(const SimConfig& cfg,
                               const std::map<std::pair<AgentId, TaskId>, double>& truth,
                               const Match& match, std::mt19937_64& rng);

SimReport run_experiment(const SimConfig& cfg);

json report_to_json(const SimReport& report);
std::string trajectory_csv(const SimReport& report);

}  // namespace arena::sim
