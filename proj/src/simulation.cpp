#include "arena/simulation.hpp"

#include <cmath>
#include <cstdio>

#include "arena/errors.hpp"
#include "arena/normal.hpp"

namespace arena::sim {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53 random bits, strictly inside (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double standard_normal(std::mt19937_64& rng) { return normal::quantile(uniform01(rng)); }

}  // namespace

void SimConfig::validate() const {
  const bool ok = n_agents >= 0 && !tasks.empty() && seeds_per_task >= 1 &&
                  std::isfinite(judge_noise) && judge_noise > 0.0 && draw_band >= 0.0 &&
                  flip_rate >= 0.0 && flip_rate < 0.5 && budget >= 0 && n_judges >= 1 &&
                  std::isfinite(skill_lo) && std::isfinite(skill_hi) && skill_lo <= skill_hi;
  if (!ok) throw ArenaError(ErrorCode::kDomain, "invalid simulation config");
  for (const auto& [key, skill] : true_skill) {
    if (!std::isfinite(skill)) throw ArenaError(ErrorCode::kDomain, "non-finite true skill");
  }
  rating.validate();
}

std::string agent_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "agent-%02d", index + 1);
  return buf;
}

std::map<std::pair<AgentId, TaskId>, double> resolve_truth(const SimConfig& cfg) {
  if (!cfg.true_skill.empty()) return cfg.true_skill;
  std::mt19937_64 rng(cfg.rng_seed ^ 0x5eed5eed5eed5eedULL);
  std::map<std::pair<AgentId, TaskId>, double> truth;
  for (int i = 0; i < cfg.n_agents; ++i) {
    for (const auto& task : cfg.tasks) {
      truth[{agent_name(i), task}] = cfg.skill_lo + (cfg.skill_hi - cfg.skill_lo) * uniform01(rng);
    }
  }
  return truth;
}

Ranking truth_ranking(const SimConfig& cfg,
                      const std::map<std::pair<AgentId, TaskId>, double>& truth) {
  std::map<TaskId, std::map<AgentId, double>> raw;
  for (int i = 0; i < cfg.n_agents; ++i) {
    for (const auto& task : cfg.tasks) {
      auto it = truth.find({agent_name(i), task});
      if (it == truth.end()) {
        throw ArenaError(ErrorCode::kMissingTruth, agent_name(i) + " on " + task);
      }
      raw[task][agent_name(i)] = it->second;
    }
  }
  if (raw.empty() || cfg.n_agents == 0) return {};
  return ranking_of(build_leaderboard(raw, cfg.tasks));
}

VerdictOutcome simulated_judge(const SimConfig& cfg,
                               const std::map<std::pair<AgentId, TaskId>, double>& truth,
                               const Match& match, std::mt19937_64& rng) {
  auto a = truth.find({match.first, match.task});
  auto b = truth.find({match.second, match.task});
  if (a == truth.end() || b == truth.end()) {
    throw ArenaError(ErrorCode::kMissingTruth, "no true skill for match on " + match.task);
  }
  const double pa = a->second + cfg.judge_noise * standard_normal(rng);
  const double pb = b->second + cfg.judge_noise * standard_normal(rng);
  const double flip_draw = uniform01(rng);
  if (std::abs(pa - pb) < cfg.draw_band) return VerdictOutcome::kDraw;
  const bool first = pa > pb;
  const bool flipped = flip_draw < cfg.flip_rate;
  return first != flipped ? VerdictOutcome::kFirstBetter : VerdictOutcome::kSecondBetter;
}

SimReport run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const auto truth = resolve_truth(cfg);

  std::int64_t now = 0;
  Competition comp([&now] { return now; });
  CreateOptions opts;
  opts.id = "simulation";
  opts.rating = cfg.rating;
  opts.engine.policy = cfg.policy;
  opts.engine.stability = cfg.stability;
  opts.rng_seed = cfg.rng_seed;
  comp.create(opts);
  for (int i = 0; i < cfg.n_agents; ++i) comp.register_agent(agent_name(i));
  for (const auto& task : cfg.tasks) {
    comp.register_task(task);
    for (int s = 0; s < cfg.seeds_per_task; ++s) {
      comp.register_seed(task, "seed-" + std::to_string(s + 1));
    }
  }
  std::vector<JudgeId> judges;
  for (int j = 0; j < cfg.n_judges; ++j) {
    judges.push_back("judge-" + std::to_string(j + 1));
    comp.register_judge(judges.back(), "token-" + std::to_string(j + 1));
  }

  SimReport report;
  report.truth = truth_ranking(cfg, truth);
  {
    // No signal when every agent's true overall score is identical.
    std::map<TaskId, std::map<AgentId, double>> raw;
    for (const auto& [key, skill] : truth) raw[key.second][key.first] = skill;
    if (cfg.n_agents > 0) {
      const auto rows = build_leaderboard(raw, cfg.tasks);
      report.no_signal = rows.front().overall == rows.back().overall;
    }
  }

  std::mt19937_64 judge_rng(cfg.rng_seed * 0x9e3779b97f4a7c15ULL + 7);
  const Criterion criterion = Criterion::kTaskCompletion;
  long used = 0;
  std::size_t turn = 0;
  while (used < cfg.budget) {
    std::optional<Match> match;
    for (std::size_t k = 0; k < judges.size() && !match; ++k) {
      try {
        match = comp.next_match(criterion, cfg.policy, judges[(turn + k) % judges.size()]);
      } catch (const ArenaError& e) {
        if (e.code() != ErrorCode::kNoMatchAvailable) throw;
      }
    }
    if (!match) break;
    ++turn;
    now += 1000;
    comp.submit_outcome({match->id, match->judge, simulated_judge(cfg, truth, *match, judge_rng)});
    ++used;

    if (used % cfg.stability.cadence == 0) {
      const auto st = comp.check_stability(criterion, cfg.stability);
      TrajectoryPoint pt;
      pt.comparisons = used;
      pt.tau = kendall_tau(ranking_of(comp.leaderboard(criterion)), report.truth);
      pt.max_dev = st.max_dev;
      pt.stable = st.stable;
      report.tau_trajectory.push_back(pt);
      if (st.stable && !report.stabilized_at) {
        report.stabilized_at = used;
        if (cfg.stop_on_stability) break;
      }
    }
  }

  report.comparisons_used = used;
  if (cfg.n_agents > 0) {
    report.final_ranking = ranking_of(comp.leaderboard(criterion));
    report.final_max_dev = comp.check_stability(criterion, cfg.stability).max_dev;
    if (used > 0) report.final_tau = kendall_tau(report.final_ranking, report.truth);
  }
  return report;
}

json report_to_json(const SimReport& r) {
  json traj = json::array();
  for (const auto& p : r.tau_trajectory) {
    traj.push_back({{"comparisons", p.comparisons},
                    {"tau", p.tau},
                    {"max_dev", p.max_dev},
                    {"stable", p.stable}});
  }
  return json{{"comparisons_used", r.comparisons_used},
              {"tau_trajectory", traj},
              {"final_tau", r.final_tau ? json(*r.final_tau) : json(nullptr)},
              {"stabilized_at", r.stabilized_at ? json(*r.stabilized_at) : json(nullptr)},
              {"final_max_dev", r.final_max_dev},
              {"no_signal", r.no_signal},
              {"truth", r.truth},
              {"final_ranking", r.final_ranking}};
}

std::string trajectory_csv(const SimReport& r) {
  std::string out = "comparisons,tau,max_dev\n";
  char buf[96];
  for (const auto& p : r.tau_trajectory) {
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f\n", p.comparisons, p.tau, p.max_dev);
    out += buf;
  }
  return out;
}

}  // namespace arena::sim
