#include "arena/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "arena/errors.hpp"

namespace arena {

std::map<AgentId, double> task_scores(const std::map<AgentId, Gaussian>& ratings,
                                      const ScoreOptions& options) {
  if (ratings.empty()) throw ArenaError(ErrorCode::kEmptyInput, "no ratings");
  std::map<AgentId, double> out;
  for (const auto& [agent, g] : ratings) {
    out[agent] = options.conservative ? g.mean - options.k * g.dev : g.mean;
  }
  return out;
}

NormalizedTask normalize_task(const std::map<AgentId, double>& scores) {
  if (scores.empty()) throw ArenaError(ErrorCode::kEmptyInput, "no scores");
  const double n = static_cast<double>(scores.size());
  double sum = 0.0;
  for (const auto& [agent, x] : scores) {
    if (!std::isfinite(x)) {
      throw ArenaError(ErrorCode::kNonFiniteScore, "non-finite score for " + agent);
    }
    sum += x;
  }
  double mu = sum / n;
  // Second pass removes the rounding left in the first mean.
  double resid = 0.0;
  for (const auto& [agent, x] : scores) resid += x - mu;
  mu += resid / n;

  double ss = 0.0;
  for (const auto& [agent, x] : scores) ss += (x - mu) * (x - mu);

  NormalizedTask out;
  out.stats.mu = mu;
  out.stats.sigma = std::sqrt(ss / n);
  out.stats.denom = std::max(out.stats.sigma, 1.0);
  for (const auto& [agent, x] : scores) {
    out.scores[agent] = (x - mu) / out.stats.denom;
  }
  return out;
}

std::map<AgentId, double> aggregate_overall(
    const std::map<AgentId, std::map<TaskId, double>>& per_task,
    const std::vector<TaskId>& tasks, const std::map<TaskId, double>& weights) {
  if (tasks.empty()) throw ArenaError(ErrorCode::kEmptyInput, "no tasks");
  double total_weight = 0.0;
  std::vector<double> w;
  for (const auto& task : tasks) {
    auto it = weights.find(task);
    w.push_back(it == weights.end() ? 1.0 : it->second);
    total_weight += w.back();
  }
  std::map<AgentId, double> out;
  for (const auto& [agent, by_task] : per_task) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto it = by_task.find(tasks[i]);
      if (it == by_task.end()) {
        throw ArenaError(ErrorCode::kMissingTaskScore,
                         "agent " + agent + " has no score for task " + tasks[i]);
      }
      acc += w[i] * it->second;
    }
    out[agent] = acc / total_weight;
  }
  return out;
}

std::vector<LeaderboardRow> rank_rows(const std::map<AgentId, double>& overall) {
  if (overall.empty()) throw ArenaError(ErrorCode::kEmptyInput, "no agents to rank");
  std::vector<LeaderboardRow> rows;
  rows.reserve(overall.size());
  for (const auto& [agent, score] : overall) {
    rows.push_back({agent, {}, score, 0});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    if (x.overall != y.overall) return x.overall > y.overall;
    return x.agent < y.agent;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank = (i > 0 && rows[i].overall == rows[i - 1].overall)
                       ? rows[i - 1].rank
                       : static_cast<int>(i) + 1;
  }
  return rows;
}

std::vector<LeaderboardRow> leaderboard_from_normalized(
    const std::map<AgentId, std::map<TaskId, double>>& normalized,
    const std::vector<TaskId>& tasks) {
  auto rows = rank_rows(aggregate_overall(normalized, tasks));
  for (auto& row : rows) {
    const auto& by_task = normalized.at(row.agent);
    for (const auto& task : tasks) row.per_task[task] = by_task.at(task);
  }
  return rows;
}

std::vector<LeaderboardRow> build_leaderboard(
    const std::map<TaskId, std::map<AgentId, double>>& raw_by_task,
    const std::vector<TaskId>& tasks) {
  std::map<AgentId, std::map<TaskId, double>> normalized;
  for (const auto& task : tasks) {
    auto it = raw_by_task.find(task);
    if (it == raw_by_task.end()) {
      throw ArenaError(ErrorCode::kMissingTaskScore, "no scores for task " + task);
    }
    for (const auto& [agent, z] : normalize_task(it->second).scores) {
      normalized[agent][task] = z;
    }
  }
  return leaderboard_from_normalized(normalized, tasks);
}

Ranking ranking_of(const std::vector<LeaderboardRow>& rows) {
  Ranking r;
  r.reserve(rows.size());
  for (const auto& row : rows) r.push_back(row.agent);
  return r;
}

double kendall_tau(const Ranking& r1, const Ranking& r2) {
  if (r1.size() != r2.size()) {
    throw ArenaError(ErrorCode::kAgentSetMismatch, "rankings differ in length");
  }
  std::unordered_map<AgentId, std::size_t> pos2;
  for (std::size_t i = 0; i < r2.size(); ++i) pos2[r2[i]] = i;
  if (pos2.size() != r2.size()) {
    throw ArenaError(ErrorCode::kAgentSetMismatch, "duplicate agent in ranking");
  }
  std::vector<std::size_t> mapped;
  mapped.reserve(r1.size());
  std::set<AgentId> seen;
  for (const auto& agent : r1) {
    auto it = pos2.find(agent);
    if (it == pos2.end() || !seen.insert(agent).second) {
      throw ArenaError(ErrorCode::kAgentSetMismatch, "agent sets differ: " + agent);
    }
    mapped.push_back(it->second);
  }
  const std::size_t n = mapped.size();
  if (n < 2) return 1.0;
  long long concordant = 0;
  long long discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (mapped[i] < mapped[j]) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

std::string format_2dp(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace arena
