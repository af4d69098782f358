#pragma once

// Per-task normalization, cross-task aggregation and leaderboard ranking.

#include <map>
#include <string>
#include <vector>

#include "arena/rating.hpp"

namespace arena {

using AgentId = std::string;
using TaskId = std::string;
using Ranking = std::vector<AgentId>;  // best first

/// Headline score of a rating. The default is the posterior mean; the
/// conservative variant reports mean - k * dev.
struct ScoreOptions {
  bool conservative = false;
  double k = 3.0;
};

struct NormalizationStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  double denom = 1.0;  // max(sigma, 1)
};

struct NormalizedTask {
  std::map<AgentId, double> scores;
  NormalizationStats stats;
};

struct LeaderboardRow {
  AgentId agent;
  std::map<TaskId, double> per_task;
  double overall = 0.0;
  int rank = 0;
};

std::map<AgentId, double> task_scores(const std::map<AgentId, Gaussian>& ratings,
                                      const ScoreOptions& options = {});

/// x -> (x - mean) / max(stddev, 1) across the agents of one task.
NormalizedTask normalize_task(const std::map<AgentId, double>& scores);

/// Weighted mean over `tasks` (weights default to 1). Throws
/// MissingTaskScore if any agent lacks one of the tasks.
std::map<AgentId, double> aggregate_overall(
    const std::map<AgentId, std::map<TaskId, double>>& per_task,
    const std::vector<TaskId>& tasks,
    const std::map<TaskId, double>& weights = {});

/// Descending by overall; equal overall shares a rank (1, 1, 3) and is
/// listed in agent-id order.
std::vector<LeaderboardRow> rank_rows(const std::map<AgentId, double>& overall);

/// Normalizes each task column, averages, ranks, and fills per_task.
std::vector<LeaderboardRow> build_leaderboard(
    const std::map<TaskId, std::map<AgentId, double>>& raw_by_task,
    const std::vector<TaskId>& tasks);

/// Leaderboard from already-normalized per-task scores.
std::vector<LeaderboardRow> leaderboard_from_normalized(
    const std::map<AgentId, std::map<TaskId, double>>& normalized,
    const std::vector<TaskId>& tasks);

Ranking ranking_of(const std::vector<LeaderboardRow>& rows);

/// Kendall rank correlation between two orderings of the same agents.
double kendall_tau(const Ranking& r1, const Ranking& r2);

/// Two-decimal display form; never prints "-0.00".
std::string format_2dp(double value);

}  // namespace arena
