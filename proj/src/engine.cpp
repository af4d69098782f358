#include "arena/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "arena/errors.hpp"

namespace arena {

namespace {

PairKey pair_key(const AgentId& a, const AgentId& b) {
  return a < b ? PairKey{a, b} : PairKey{b, a};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

bool valid_identifier(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
           c == '.';
  });
}

OutcomeKind rating_outcome(VerdictOutcome o) {
  switch (o) {
    case VerdictOutcome::kFirstBetter:
      return OutcomeKind::kFirstWins;
    case VerdictOutcome::kSecondBetter:
      return OutcomeKind::kSecondWins;
    default:
      return OutcomeKind::kDraw;
  }
}

const VerdictRecord& final_verdict(const Match& m) {
  // A completed match ends with exactly one non-skip verdict.
  return m.verdicts.back();
}

template <typename T>
T field_or(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  return it == doc.end() ? fallback : it->get<T>();
}

std::map<AgentId, std::map<TaskId, double>> parse_override(const json& doc) {
  std::map<AgentId, std::map<TaskId, double>> out;
  for (auto a = doc.begin(); a != doc.end(); ++a) {
    if (!a.value().is_object()) {
      throw ArenaError(ErrorCode::kSchemaViolation, "normalized scores must be objects");
    }
    for (auto t = a.value().begin(); t != a.value().end(); ++t) {
      if (!t.value().is_number() || !std::isfinite(t.value().get<double>())) {
        throw ArenaError(ErrorCode::kNonFiniteScore, "bad normalized score for " + a.key());
      }
      out[a.key()][t.key()] = t.value().get<double>();
    }
  }
  return out;
}

void fold(CompetitionState& s, const Event& e) {
  const json& p = e.payload;
  if (!s.created() && e.kind != EventKind::kCompetitionCreated) {
    throw ArenaError(ErrorCode::kSchemaViolation, "competition not created yet");
  }
  switch (e.kind) {
    case EventKind::kCompetitionCreated: {
      if (s.created()) throw ArenaError(ErrorCode::kDuplicate, "competition already created");
      s.id = p.at("id").get<std::string>();
      s.name = p.at("name").get<std::string>();
      for (const auto& c : p.at("criteria")) {
        auto crit = criterion_from_string(c.get<std::string>());
        if (!s.has_criterion(crit)) s.criteria.push_back(crit);
      }
      if (p.contains("rating")) s.rating = rating_config_from_json(p["rating"]);
      if (p.contains("engine")) s.engine = engine_config_from_json(p["engine"]);
      s.rng_seed = field_or<std::uint64_t>(p, "rng_seed", 0);
      break;
    }
    case EventKind::kAgentRegistered: {
      const auto agent = p.at("agent").get<std::string>();
      if (s.has_agent(agent)) throw ArenaError(ErrorCode::kDuplicate, "agent " + agent);
      s.agents.push_back(agent);
      break;
    }
    case EventKind::kTaskRegistered: {
      const auto task = p.at("task").get<std::string>();
      if (s.has_task(task)) throw ArenaError(ErrorCode::kDuplicate, "task " + task);
      s.tasks.push_back(task);
      s.task_descriptions[task] = field_or<std::string>(p, "description", "");
      s.seeds[task];
      break;
    }
    case EventKind::kSeedRegistered: {
      const auto task = p.at("task").get<std::string>();
      const auto seed = p.at("seed").get<std::string>();
      if (!s.has_task(task)) throw ArenaError(ErrorCode::kNotFound, "task " + task);
      auto& list = s.seeds[task];
      if (std::find(list.begin(), list.end(), seed) != list.end()) {
        throw ArenaError(ErrorCode::kDuplicate, "seed " + seed);
      }
      list.push_back(seed);
      break;
    }
    case EventKind::kVideoRegistered: {
      VideoRef v;
      v.agent = p.at("agent").get<std::string>();
      v.task = p.at("task").get<std::string>();
      v.seed = p.at("seed").get<std::string>();
      v.uri = p.at("uri").get<std::string>();
      if (p.contains("duration_s")) v.duration_s = p["duration_s"].get<double>();
      if (!s.has_agent(v.agent) || !s.has_task(v.task)) {
        throw ArenaError(ErrorCode::kNotFound, "video for unknown agent or task");
      }
      const auto& seeds = s.seeds[v.task];
      if (std::find(seeds.begin(), seeds.end(), v.seed) == seeds.end()) {
        throw ArenaError(ErrorCode::kNotFound, "video for unknown seed " + v.seed);
      }
      auto key = std::make_tuple(v.agent, v.task, v.seed);
      if (s.videos.count(key)) throw ArenaError(ErrorCode::kDuplicate, "video already registered");
      s.videos.emplace(key, std::move(v));
      break;
    }
    case EventKind::kJudgeRegistered: {
      const auto judge = p.at("judge").get<std::string>();
      if (s.judges.count(judge)) throw ArenaError(ErrorCode::kDuplicate, "judge " + judge);
      s.judges[judge] = JudgeInfo{p.at("token").get<std::string>(), false};
      break;
    }
    case EventKind::kMatchScheduled: {
      Match m;
      m.id = p.at("match").get<MatchId>();
      if (m.id != s.next_match_id) {
        throw ArenaError(ErrorCode::kSchemaViolation, "match ids must be sequential");
      }
      m.task = p.at("task").get<std::string>();
      m.seed = p.at("seed").get<std::string>();
      m.first = p.at("first").get<std::string>();
      m.second = p.at("second").get<std::string>();
      m.criterion = criterion_from_string(p.at("criterion").get<std::string>());
      if (!s.has_agent(m.first) || !s.has_agent(m.second) || !s.has_task(m.task) ||
          !s.has_criterion(m.criterion)) {
        throw ArenaError(ErrorCode::kNotFound, "match references unknown entity");
      }
      ++s.next_match_id;
      ++s.seed_usage[{pair_key(m.first, m.second), m.task, m.seed, m.criterion}];
      s.matches.emplace(m.id, std::move(m));
      break;
    }
    case EventKind::kMatchAssigned: {
      auto it = s.matches.find(p.at("match").get<MatchId>());
      if (it == s.matches.end()) throw ArenaError(ErrorCode::kUnknownMatch, "assign");
      Match& m = it->second;
      if (m.status != MatchStatus::kPending && m.status != MatchStatus::kExpired) {
        throw ArenaError(ErrorCode::kSchemaViolation,
                         "cannot assign a match that is " + to_string(m.status));
      }
      const auto judge = p.at("judge").get<std::string>();
      if (!s.judges.count(judge)) throw ArenaError(ErrorCode::kUnknownJudge, judge);
      m.status = MatchStatus::kAssigned;
      m.judge = judge;
      m.deadline = p.at("deadline").get<std::int64_t>();
      break;
    }
    case EventKind::kVerdictSubmitted: {
      auto it = s.matches.find(p.at("match").get<MatchId>());
      if (it == s.matches.end()) throw ArenaError(ErrorCode::kUnknownMatch, "verdict");
      Match& m = it->second;
      const auto judge = p.at("judge").get<std::string>();
      if (m.status != MatchStatus::kAssigned || m.judge != judge) {
        throw ArenaError(ErrorCode::kNotAssignedToJudge, "verdict from " + judge);
      }
      const auto outcome = verdict_outcome_from_string(p.at("outcome").get<std::string>());
      m.verdicts.push_back({judge, outcome, e.at});
      const auto key = pair_key(m.first, m.second);
      s.seen.insert({judge, key, m.task, m.seed, m.criterion});
      if (outcome == VerdictOutcome::kSkip) {
        m.status = MatchStatus::kPending;
        break;
      }
      auto& table = s.ratings[m.criterion][m.task];
      const Gaussian a = s.rating_of(m.criterion, m.task, m.first);
      const Gaussian b = s.rating_of(m.criterion, m.task, m.second);
      const UpdateResult r = update_ratings(a, b, rating_outcome(outcome), s.rating);
      table[m.first] = r.first;
      table[m.second] = r.second;
      m.status = MatchStatus::kCompleted;
      m.completed_seq = e.seq;
      ++s.rating_updates;
      s.completion_order[m.criterion].push_back(m.id);
      ++s.completed_per_task[m.criterion][m.task];
      ++s.judge_completed[judge];
      break;
    }
    case EventKind::kMatchExpired: {
      auto it = s.matches.find(p.at("match").get<MatchId>());
      if (it == s.matches.end()) throw ArenaError(ErrorCode::kUnknownMatch, "expire");
      Match& m = it->second;
      if (m.status != MatchStatus::kAssigned) {
        throw ArenaError(ErrorCode::kSchemaViolation, "only assigned matches expire");
      }
      m.status = MatchStatus::kExpired;
      m.past_assignees.insert(m.judge);
      break;
    }
    case EventKind::kConfigUpdated: {
      if (p.contains("rating")) {
        if (s.rating_updates > 0) {
          throw ArenaError(ErrorCode::kDomain, "rating config is frozen after the first update");
        }
        s.rating = rating_config_from_json(p["rating"], s.rating);
      }
      if (p.contains("engine")) s.engine = engine_config_from_json(p["engine"], s.engine);
      if (p.contains("normalized_scores")) {
        const json& ns = p["normalized_scores"];
        for (auto c = ns.begin(); c != ns.end(); ++c) {
          s.normalized_override[criterion_from_string(c.key())] = parse_override(c.value());
        }
      }
      if (p.contains("revoked_judges")) {
        for (const auto& j : p["revoked_judges"]) {
          auto it = s.judges.find(j.get<std::string>());
          if (it == s.judges.end()) throw ArenaError(ErrorCode::kUnknownJudge, "revoke");
          it->second.revoked = true;
        }
      }
      break;
    }
  }
}

}  // namespace

std::string to_string(Criterion c) {
  return c == Criterion::kTaskCompletion ? "task-completion" : "human-likeness";
}

Criterion criterion_from_string(const std::string& name) {
  if (name == "task-completion") return Criterion::kTaskCompletion;
  if (name == "human-likeness") return Criterion::kHumanLikeness;
  throw ArenaError(ErrorCode::kSchemaViolation, "unknown criterion '" + name + "'");
}

std::string to_string(MatchStatus s) {
  switch (s) {
    case MatchStatus::kPending:
      return "pending";
    case MatchStatus::kAssigned:
      return "assigned";
    case MatchStatus::kCompleted:
      return "completed";
    case MatchStatus::kExpired:
      return "expired";
  }
  return "?";
}

std::string to_string(VerdictOutcome o) {
  switch (o) {
    case VerdictOutcome::kFirstBetter:
      return "first";
    case VerdictOutcome::kSecondBetter:
      return "second";
    case VerdictOutcome::kDraw:
      return "draw";
    case VerdictOutcome::kSkip:
      return "skip";
  }
  return "?";
}

VerdictOutcome verdict_outcome_from_string(const std::string& name) {
  if (name == "first") return VerdictOutcome::kFirstBetter;
  if (name == "second") return VerdictOutcome::kSecondBetter;
  if (name == "draw") return VerdictOutcome::kDraw;
  if (name == "skip") return VerdictOutcome::kSkip;
  throw ArenaError(ErrorCode::kSchemaViolation, "unknown outcome '" + name + "'");
}

std::string to_string(SchedulerPolicy::Kind k) {
  switch (k) {
    case SchedulerPolicy::Kind::kUniformRandom:
      return "uniform-random";
    case SchedulerPolicy::Kind::kRoundRobinPairs:
      return "round-robin-pairs";
    case SchedulerPolicy::Kind::kUncertaintyGreedy:
      return "uncertainty-greedy";
  }
  return "?";
}

SchedulerPolicy policy_from_string(const std::string& name, int candidate_pool) {
  if (name == "uniform-random" || name == "uniform") return SchedulerPolicy::uniform_random();
  if (name == "round-robin-pairs" || name == "round-robin") {
    return SchedulerPolicy::round_robin_pairs();
  }
  if (name == "uncertainty-greedy" || name == "greedy") {
    return SchedulerPolicy::uncertainty_greedy(candidate_pool);
  }
  throw ArenaError(ErrorCode::kSchemaViolation, "unknown scheduler policy '" + name + "'");
}

StabilityReport evaluate_stability(const std::vector<Checkpoint>& checkpoints,
                                   double max_dev, long completed,
                                   std::size_t n_agents, const StabilityConfig& cfg) {
  if (cfg.window < 1 || cfg.cadence < 1) {
    throw ArenaError(ErrorCode::kDomain, "stability window and cadence must be >= 1");
  }
  StabilityReport r;
  r.max_dev = max_dev;
  r.completed = completed;
  r.checkpoints = static_cast<long>(checkpoints.size());
  r.min_comparisons = cfg.min_comparisons < 0 ? 10 * static_cast<long>(n_agents)
                                              : cfg.min_comparisons;
  const auto w = static_cast<std::size_t>(cfg.window);
  if (checkpoints.size() < w) return r;
  bool taus_ok = true;
  for (std::size_t i = checkpoints.size() - w + 1; i < checkpoints.size(); ++i) {
    const double tau = kendall_tau(checkpoints[i - 1].ranking, checkpoints[i].ranking);
    r.tau_window.push_back(tau);
    taus_ok = taus_ok && tau >= cfg.tau_min;
  }
  r.stable = taus_ok && max_dev <= cfg.sigma_stop && completed >= r.min_comparisons;
  return r;
}

bool CompetitionState::has_agent(const AgentId& a) const {
  return std::find(agents.begin(), agents.end(), a) != agents.end();
}

bool CompetitionState::has_task(const TaskId& t) const {
  return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
}

bool CompetitionState::has_criterion(Criterion c) const {
  return std::find(criteria.begin(), criteria.end(), c) != criteria.end();
}

Gaussian CompetitionState::rating_of(Criterion c, const TaskId& task,
                                     const AgentId& agent) const {
  auto ci = ratings.find(c);
  if (ci == ratings.end()) return rating.prior();
  auto ti = ci->second.find(task);
  if (ti == ci->second.end()) return rating.prior();
  auto ai = ti->second.find(agent);
  return ai == ti->second.end() ? rating.prior() : ai->second;
}

void CompetitionState::rebuild_indexes() {
  completion_order.clear();
  completed_per_task.clear();
  seen.clear();
  seed_usage.clear();
  judge_completed.clear();
  std::map<Criterion, std::vector<std::pair<std::int64_t, MatchId>>> done;
  for (const auto& [id, m] : matches) {
    const auto key = pair_key(m.first, m.second);
    ++seed_usage[{key, m.task, m.seed, m.criterion}];
    for (const auto& v : m.verdicts) {
      seen.insert({v.judge, key, m.task, m.seed, m.criterion});
      if (v.outcome != VerdictOutcome::kSkip) ++judge_completed[v.judge];
    }
    if (m.status == MatchStatus::kCompleted) {
      done[m.criterion].push_back({m.completed_seq, id});
      ++completed_per_task[m.criterion][m.task];
    }
  }
  for (auto& [c, list] : done) {
    std::sort(list.begin(), list.end());
    for (const auto& [seq, id] : list) completion_order[c].push_back(id);
  }
}

json rating_config_to_json(const RatingConfig& cfg) {
  return json{{"mu0", cfg.mu0},   {"sigma0", cfg.sigma0}, {"beta", cfg.beta},
              {"tau", cfg.tau},   {"p_draw", cfg.p_draw}};
}

RatingConfig rating_config_from_json(const json& doc, RatingConfig base) {
  try {
    base.mu0 = field_or(doc, "mu0", base.mu0);
    base.sigma0 = field_or(doc, "sigma0", base.sigma0);
    base.beta = field_or(doc, "beta", base.beta);
    base.tau = field_or(doc, "tau", base.tau);
    base.p_draw = field_or(doc, "p_draw", base.p_draw);
  } catch (const json::exception& e) {
    throw ArenaError(ErrorCode::kSchemaViolation, std::string("rating config: ") + e.what());
  }
  base.validate();
  return base;
}

json engine_config_to_json(const EngineConfig& cfg) {
  return json{
      {"deadline_ms", cfg.deadline_ms},
      {"grace_ms", cfg.grace_ms},
      {"policy", to_string(cfg.policy.kind)},
      {"candidate_pool", cfg.policy.candidate_pool},
      {"stability",
       {{"cadence", cfg.stability.cadence},
        {"window", cfg.stability.window},
        {"tau_min", cfg.stability.tau_min},
        {"sigma_stop", cfg.stability.sigma_stop},
        {"min_comparisons", cfg.stability.min_comparisons}}},
      {"conservative", cfg.score.conservative},
      {"conservative_k", cfg.score.k},
  };
}

EngineConfig engine_config_from_json(const json& doc, EngineConfig base) {
  try {
    base.deadline_ms = field_or(doc, "deadline_ms", base.deadline_ms);
    base.grace_ms = field_or(doc, "grace_ms", base.grace_ms);
    const int pool = field_or(doc, "candidate_pool", base.policy.candidate_pool);
    base.policy = policy_from_string(field_or(doc, "policy", to_string(base.policy.kind)), pool);
    base.policy.candidate_pool = pool;
    if (doc.contains("stability")) {
      const json& st = doc["stability"];
      base.stability.cadence = field_or(st, "cadence", base.stability.cadence);
      base.stability.window = field_or(st, "window", base.stability.window);
      base.stability.tau_min = field_or(st, "tau_min", base.stability.tau_min);
      base.stability.sigma_stop = field_or(st, "sigma_stop", base.stability.sigma_stop);
      base.stability.min_comparisons =
          field_or(st, "min_comparisons", base.stability.min_comparisons);
    }
    base.score.conservative = field_or(doc, "conservative", base.score.conservative);
    base.score.k = field_or(doc, "conservative_k", base.score.k);
  } catch (const json::exception& e) {
    throw ArenaError(ErrorCode::kSchemaViolation, std::string("engine config: ") + e.what());
  }
  if (base.policy.candidate_pool < 1 || base.deadline_ms <= 0 || base.grace_ms < 0 ||
      base.stability.cadence < 1 || base.stability.window < 1) {
    throw ArenaError(ErrorCode::kSchemaViolation, "engine config out of range");
  }
  return base;
}

json state_to_json(const CompetitionState& s) {
  json doc;
  doc["id"] = s.id;
  doc["name"] = s.name;
  json crit = json::array();
  for (auto c : s.criteria) crit.push_back(to_string(c));
  doc["criteria"] = crit;
  doc["rating"] = rating_config_to_json(s.rating);
  doc["engine"] = engine_config_to_json(s.engine);
  doc["rng_seed"] = s.rng_seed;
  doc["agents"] = s.agents;
  doc["tasks"] = s.tasks;
  doc["task_descriptions"] = s.task_descriptions;
  doc["seeds"] = s.seeds;
  json videos = json::array();
  for (const auto& [key, v] : s.videos) {
    json jv{{"agent", v.agent}, {"task", v.task}, {"seed", v.seed}, {"uri", v.uri}};
    if (v.duration_s) jv["duration_s"] = *v.duration_s;
    videos.push_back(jv);
  }
  doc["videos"] = videos;
  json judges = json::object();
  for (const auto& [id, j] : s.judges) {
    judges[id] = {{"token", j.token}, {"revoked", j.revoked}};
  }
  doc["judges"] = judges;
  json matches = json::array();
  for (const auto& [id, m] : s.matches) {
    json verdicts = json::array();
    for (const auto& v : m.verdicts) {
      verdicts.push_back({{"judge", v.judge}, {"outcome", to_string(v.outcome)}, {"at", v.at}});
    }
    matches.push_back({{"id", m.id},
                       {"task", m.task},
                       {"seed", m.seed},
                       {"first", m.first},
                       {"second", m.second},
                       {"criterion", to_string(m.criterion)},
                       {"status", to_string(m.status)},
                       {"judge", m.judge},
                       {"deadline", m.deadline},
                       {"verdicts", verdicts},
                       {"past_assignees", m.past_assignees},
                       {"completed_seq", m.completed_seq}});
  }
  doc["matches"] = matches;
  json ratings = json::object();
  for (const auto& [c, by_task] : s.ratings) {
    for (const auto& [task, by_agent] : by_task) {
      for (const auto& [agent, g] : by_agent) {
        ratings[to_string(c)][task][agent] = json::array({g.mean, g.dev});
      }
    }
  }
  doc["ratings"] = ratings;
  json overrides = json::object();
  for (const auto& [c, table] : s.normalized_override) overrides[to_string(c)] = table;
  doc["normalized_override"] = overrides;
  doc["last_seq"] = s.last_seq;
  doc["last_at"] = s.last_at;
  doc["next_match_id"] = s.next_match_id;
  doc["rating_updates"] = s.rating_updates;
  return doc;
}

CompetitionState state_from_json(const json& doc) {
  CompetitionState s;
  try {
    s.id = doc.at("id").get<std::string>();
    s.name = doc.at("name").get<std::string>();
    for (const auto& c : doc.at("criteria")) s.criteria.push_back(criterion_from_string(c));
    s.rating = rating_config_from_json(doc.at("rating"));
    s.engine = engine_config_from_json(doc.at("engine"));
    s.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    s.agents = doc.at("agents").get<std::vector<AgentId>>();
    s.tasks = doc.at("tasks").get<std::vector<TaskId>>();
    s.task_descriptions = doc.at("task_descriptions").get<std::map<TaskId, std::string>>();
    s.seeds = doc.at("seeds").get<std::map<TaskId, std::vector<SeedId>>>();
    for (const auto& jv : doc.at("videos")) {
      VideoRef v{jv.at("agent"), jv.at("task"), jv.at("seed"), jv.at("uri"), std::nullopt};
      if (jv.contains("duration_s")) v.duration_s = jv["duration_s"].get<double>();
      s.videos.emplace(std::make_tuple(v.agent, v.task, v.seed), v);
    }
    for (auto it = doc.at("judges").begin(); it != doc.at("judges").end(); ++it) {
      s.judges[it.key()] = JudgeInfo{it.value().at("token"), it.value().at("revoked")};
    }
    for (const auto& jm : doc.at("matches")) {
      Match m;
      m.id = jm.at("id").get<MatchId>();
      m.task = jm.at("task");
      m.seed = jm.at("seed");
      m.first = jm.at("first");
      m.second = jm.at("second");
      m.criterion = criterion_from_string(jm.at("criterion"));
      const std::string status = jm.at("status");
      if (status == "pending") m.status = MatchStatus::kPending;
      else if (status == "assigned") m.status = MatchStatus::kAssigned;
      else if (status == "completed") m.status = MatchStatus::kCompleted;
      else if (status == "expired") m.status = MatchStatus::kExpired;
      else throw ArenaError(ErrorCode::kSchemaViolation, "bad match status " + status);
      m.judge = jm.at("judge");
      m.deadline = jm.at("deadline").get<std::int64_t>();
      for (const auto& jv : jm.at("verdicts")) {
        m.verdicts.push_back({jv.at("judge"), verdict_outcome_from_string(jv.at("outcome")),
                              jv.at("at").get<std::int64_t>()});
      }
      m.past_assignees = jm.at("past_assignees").get<std::set<JudgeId>>();
      m.completed_seq = jm.at("completed_seq").get<std::int64_t>();
      s.matches.emplace(m.id, std::move(m));
    }
    const json& ratings = doc.at("ratings");
    for (auto c = ratings.begin(); c != ratings.end(); ++c) {
      for (auto t = c.value().begin(); t != c.value().end(); ++t) {
        for (auto a = t.value().begin(); a != t.value().end(); ++a) {
          s.ratings[criterion_from_string(c.key())][t.key()][a.key()] =
              Gaussian{a.value().at(0).get<double>(), a.value().at(1).get<double>()};
        }
      }
    }
    const json& ov = doc.at("normalized_override");
    for (auto c = ov.begin(); c != ov.end(); ++c) {
      s.normalized_override[criterion_from_string(c.key())] = parse_override(c.value());
    }
    s.last_seq = doc.at("last_seq").get<std::int64_t>();
    s.last_at = doc.at("last_at").get<std::int64_t>();
    s.next_match_id = doc.at("next_match_id").get<MatchId>();
    s.rating_updates = doc.at("rating_updates").get<long>();
  } catch (const json::exception& e) {
    throw ArenaError(ErrorCode::kSchemaViolation, std::string("state document: ") + e.what());
  }
  s.rebuild_indexes();
  return s;
}

void apply_event(CompetitionState& state, const Event& event) {
  if (event.seq != state.last_seq + 1) {
    throw CorruptLogError(event.seq, "expected seq " + std::to_string(state.last_seq + 1));
  }
  try {
    validate_payload(event.kind, event.payload);
    fold(state, event);
  } catch (const CorruptLogError&) {
    throw;
  } catch (const ArenaError& e) {
    throw CorruptLogError(event.seq, e.what());
  } catch (const json::exception& e) {
    throw CorruptLogError(event.seq, e.what());
  }
  state.last_seq = event.seq;
  state.last_at = event.at;
}

Competition::Competition(Clock clock, EventSink sink)
    : clock_(std::move(clock)), sink_(std::move(sink)) {}

Competition Competition::restore(CompetitionState state, const std::vector<Event>& tail,
                                 Clock clock, EventSink sink) {
  Competition c(std::move(clock), std::move(sink));
  c.state_ = std::move(state);
  for (const auto& e : tail) c.apply(e);
  return c;
}

Event Competition::emit(EventKind kind, json payload) {
  Event e;
  e.seq = state_.last_seq + 1;
  e.at = clock_();
  e.kind = kind;
  e.payload = std::move(payload);
  validate_payload(e.kind, e.payload);
  if (sink_) sink_(e);
  apply_event(state_, e);
  return e;
}

void Competition::require_created() const {
  if (!state_.created()) throw ArenaError(ErrorCode::kNotFound, "competition not created");
}

void Competition::create(const CreateOptions& o) {
  if (state_.created()) throw ArenaError(ErrorCode::kDuplicate, "competition exists");
  if (!valid_identifier(o.id)) {
    throw ArenaError(ErrorCode::kSchemaViolation, "invalid competition id '" + o.id + "'");
  }
  if (o.criteria.empty()) throw ArenaError(ErrorCode::kSchemaViolation, "no criteria");
  o.rating.validate();
  json criteria = json::array();
  for (auto c : o.criteria) criteria.push_back(to_string(c));
  emit(EventKind::kCompetitionCreated,
       {{"id", o.id},
        {"name", o.name.empty() ? o.id : o.name},
        {"criteria", criteria},
        {"rating", rating_config_to_json(o.rating)},
        {"engine", engine_config_to_json(o.engine)},
        {"rng_seed", o.rng_seed}});
}

void Competition::register_agent(const AgentId& agent) {
  require_created();
  if (agent.empty()) throw ArenaError(ErrorCode::kSchemaViolation, "empty agent name");
  if (state_.has_agent(agent)) throw ArenaError(ErrorCode::kDuplicate, "agent " + agent);
  emit(EventKind::kAgentRegistered, {{"agent", agent}});
}

void Competition::register_task(const TaskId& task, const std::string& description) {
  require_created();
  if (task.empty()) throw ArenaError(ErrorCode::kSchemaViolation, "empty task name");
  if (state_.has_task(task)) throw ArenaError(ErrorCode::kDuplicate, "task " + task);
  json p{{"task", task}};
  if (!description.empty()) p["description"] = description;
  emit(EventKind::kTaskRegistered, p);
}

void Competition::register_seed(const TaskId& task, const SeedId& seed) {
  require_created();
  if (seed.empty()) throw ArenaError(ErrorCode::kSchemaViolation, "empty seed name");
  if (!state_.has_task(task)) throw ArenaError(ErrorCode::kNotFound, "task " + task);
  const auto& list = state_.seeds.at(task);
  if (std::find(list.begin(), list.end(), seed) != list.end()) {
    throw ArenaError(ErrorCode::kDuplicate, "seed " + seed);
  }
  emit(EventKind::kSeedRegistered, {{"task", task}, {"seed", seed}});
}

void Competition::register_video(const VideoRef& v) {
  require_created();
  if (v.uri.empty()) throw ArenaError(ErrorCode::kSchemaViolation, "empty video uri");
  if (!state_.has_agent(v.agent)) throw ArenaError(ErrorCode::kNotFound, "agent " + v.agent);
  if (!state_.has_task(v.task)) throw ArenaError(ErrorCode::kNotFound, "task " + v.task);
  const auto& seeds = state_.seeds.at(v.task);
  if (std::find(seeds.begin(), seeds.end(), v.seed) == seeds.end()) {
    throw ArenaError(ErrorCode::kNotFound, "seed " + v.seed);
  }
  if (state_.videos.count({v.agent, v.task, v.seed})) {
    throw ArenaError(ErrorCode::kDuplicate, "video for " + v.agent + "/" + v.task + "/" + v.seed);
  }
  json p{{"agent", v.agent}, {"task", v.task}, {"seed", v.seed}, {"uri", v.uri}};
  if (v.duration_s) p["duration_s"] = *v.duration_s;
  emit(EventKind::kVideoRegistered, p);
}

void Competition::register_judge(const JudgeId& judge, const std::string& token) {
  require_created();
  if (judge.empty() || token.empty()) {
    throw ArenaError(ErrorCode::kSchemaViolation, "judge and token must be non-empty");
  }
  if (state_.judges.count(judge)) throw ArenaError(ErrorCode::kDuplicate, "judge " + judge);
  for (const auto& [id, info] : state_.judges) {
    if (info.token == token) throw ArenaError(ErrorCode::kDuplicate, "token reuse");
  }
  emit(EventKind::kJudgeRegistered, {{"judge", judge}, {"token", token}});
}

void Competition::update_config(const json& patch) {
  require_created();
  validate_payload(EventKind::kConfigUpdated, patch);
  // Dry-run on a copy so a bad patch never reaches the log.
  CompetitionState probe = state_;
  Event e{state_.last_seq + 1, state_.last_at, EventKind::kConfigUpdated, patch};
  try {
    fold(probe, e);
  } catch (const json::exception& ex) {
    throw ArenaError(ErrorCode::kSchemaViolation, ex.what());
  }
  emit(EventKind::kConfigUpdated, patch);
}

int Competition::expire_overdue() {
  require_created();
  const std::int64_t now = clock_();
  std::vector<MatchId> overdue;
  for (const auto& [id, m] : state_.matches) {
    if (m.status == MatchStatus::kAssigned && now > m.deadline + state_.engine.grace_ms) {
      overdue.push_back(id);
    }
  }
  for (MatchId id : overdue) emit(EventKind::kMatchExpired, {{"match", id}});
  return static_cast<int>(overdue.size());
}

Match Competition::next_match(Criterion criterion, const SchedulerPolicy& policy,
                              const JudgeId& judge) {
  require_created();
  auto ji = state_.judges.find(judge);
  if (ji == state_.judges.end() || ji->second.revoked) {
    throw ArenaError(ErrorCode::kUnknownJudge, "unknown judge '" + judge + "'");
  }
  if (!state_.has_criterion(criterion)) {
    throw ArenaError(ErrorCode::kSchemaViolation,
                     "criterion " + to_string(criterion) + " is not enabled");
  }
  if (policy.candidate_pool < 1) {
    throw ArenaError(ErrorCode::kDomain, "candidate_pool must be >= 1");
  }
  expire_overdue();

  auto assign = [&](MatchId id) {
    emit(EventKind::kMatchAssigned,
         {{"match", id}, {"judge", judge}, {"deadline", clock_() + state_.engine.deadline_ms}});
    return state_.matches.at(id);
  };

  for (const auto& [id, m] : state_.matches) {
    if (m.criterion == criterion && m.status == MatchStatus::kAssigned && m.judge == judge) {
      return m;
    }
  }
  for (const auto& [id, m] : state_.matches) {
    if (m.criterion != criterion) continue;
    if (m.status != MatchStatus::kPending && m.status != MatchStatus::kExpired) continue;
    if (state_.seen.count({judge, pair_key(m.first, m.second), m.task, m.seed, criterion})) {
      continue;
    }
    return assign(id);
  }

  if (state_.agents.size() < 2 || state_.tasks.empty()) {
    throw ArenaError(ErrorCode::kNoMatchAvailable, "not enough agents or tasks");
  }

  std::mt19937_64 rng(splitmix64(state_.rng_seed ^ splitmix64(
                                     static_cast<std::uint64_t>(state_.last_seq))));

  std::vector<AgentId> agents = state_.agents;
  std::sort(agents.begin(), agents.end());

  // Least-served task first; registration order breaks ties.
  std::vector<std::size_t> task_order(state_.tasks.size());
  for (std::size_t i = 0; i < task_order.size(); ++i) task_order[i] = i;
  auto count_of = [&](const TaskId& t) {
    auto ci = state_.completed_per_task.find(criterion);
    if (ci == state_.completed_per_task.end()) return 0L;
    auto it = ci->second.find(t);
    return it == ci->second.end() ? 0L : it->second;
  };
  std::stable_sort(task_order.begin(), task_order.end(), [&](std::size_t x, std::size_t y) {
    return count_of(state_.tasks[x]) < count_of(state_.tasks[y]);
  });

  for (std::size_t ti : task_order) {
    const TaskId& task = state_.tasks[ti];
    const auto& seeds = state_.seeds.at(task);
    if (seeds.empty()) continue;

    auto usage = [&](const PairKey& pk, const SeedId& seed) {
      auto it = state_.seed_usage.find({pk, task, seed, criterion});
      return it == state_.seed_usage.end() ? 0L : it->second;
    };

    struct Candidate {
      PairKey pair;
      std::vector<SeedId> seeds;
    };
    std::vector<Candidate> eligible;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        PairKey pk{agents[i], agents[j]};
        Candidate cand{pk, {}};
        for (const auto& seed : seeds) {
          if (!state_.seen.count({judge, pk, task, seed, criterion})) cand.seeds.push_back(seed);
        }
        if (!cand.seeds.empty()) eligible.push_back(std::move(cand));
      }
    }
    if (eligible.empty()) continue;

    std::size_t chosen = 0;
    switch (policy.kind) {
      case SchedulerPolicy::Kind::kUniformRandom:
        chosen = uniform_index(rng, eligible.size());
        break;
      case SchedulerPolicy::Kind::kRoundRobinPairs: {
        long best = std::numeric_limits<long>::max();
        for (std::size_t k = 0; k < eligible.size(); ++k) {
          long n = 0;
          for (const auto& seed : seeds) n += usage(eligible[k].pair, seed);
          if (n < best) {
            best = n;
            chosen = k;
          }
        }
        break;
      }
      case SchedulerPolicy::Kind::kUncertaintyGreedy: {
        std::vector<std::size_t> idx(eligible.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        const std::size_t pool =
            std::min(idx.size(), static_cast<std::size_t>(policy.candidate_pool));
        if (pool < idx.size()) {
          for (std::size_t k = 0; k < pool; ++k) {
            std::swap(idx[k], idx[k + uniform_index(rng, idx.size() - k)]);
          }
          idx.resize(pool);
        }
        double best = -1.0;
        for (std::size_t k : idx) {
          const auto& pk = eligible[k].pair;
          const Gaussian a = state_.rating_of(criterion, task, pk.first);
          const Gaussian b = state_.rating_of(criterion, task, pk.second);
          const double score = match_quality(a, b, state_.rating) * (a.dev + b.dev);
          if (score > best || (score == best && pk < eligible[chosen].pair)) {
            best = score;
            chosen = k;
          }
        }
        break;
      }
    }

    const Candidate& pick = eligible[chosen];
    SeedId seed = pick.seeds.front();
    long seed_uses = usage(pick.pair, seed);
    for (const auto& s : pick.seeds) {
      const long u = usage(pick.pair, s);
      if (u < seed_uses || (u == seed_uses && s < seed)) {
        seed = s;
        seed_uses = u;
      }
    }
    const bool swap_sides = (rng() & 1ULL) != 0;
    const AgentId& first = swap_sides ? pick.pair.second : pick.pair.first;
    const AgentId& second = swap_sides ? pick.pair.first : pick.pair.second;
    const MatchId id = state_.next_match_id;
    emit(EventKind::kMatchScheduled, {{"match", id},
                                      {"task", task},
                                      {"seed", seed},
                                      {"first", first},
                                      {"second", second},
                                      {"criterion", to_string(criterion)}});
    return assign(id);
  }
  throw ArenaError(ErrorCode::kNoMatchAvailable, "no eligible match for judge '" + judge + "'");
}

SubmitResult Competition::submit_outcome(const Verdict& v) {
  require_created();
  auto mi = state_.matches.find(v.match);
  if (mi == state_.matches.end()) {
    throw ArenaError(ErrorCode::kUnknownMatch, "unknown match " + std::to_string(v.match));
  }
  auto ji = state_.judges.find(v.judge);
  if (ji == state_.judges.end() || ji->second.revoked) {
    throw ArenaError(ErrorCode::kUnknownJudge, "unknown judge '" + v.judge + "'");
  }
  const Match& m = mi->second;
  auto counter = [&] {
    auto it = state_.judge_completed.find(v.judge);
    return it == state_.judge_completed.end() ? 0L : it->second;
  };
  for (const auto& rec : m.verdicts) {
    if (rec.judge == v.judge && rec.outcome == v.outcome) return {false, counter()};
  }
  if (m.status == MatchStatus::kCompleted) {
    throw ArenaError(ErrorCode::kAlreadyCompleted,
                     "match " + std::to_string(v.match) + " already has a verdict");
  }
  if (m.status == MatchStatus::kAssigned && m.judge == v.judge) {
    if (clock_() > m.deadline + state_.engine.grace_ms) {
      throw ArenaError(ErrorCode::kMatchExpired, "assignment deadline passed");
    }
    if (v.outcome == VerdictOutcome::kDraw && state_.rating.p_draw == 0.0) {
      throw ArenaError(ErrorCode::kDomain, "draw verdicts are disabled");
    }
    emit(EventKind::kVerdictSubmitted,
         {{"match", v.match}, {"judge", v.judge}, {"outcome", to_string(v.outcome)}});
    return {true, counter()};
  }
  if (m.past_assignees.count(v.judge) ||
      (m.status == MatchStatus::kExpired && m.judge == v.judge)) {
    throw ArenaError(ErrorCode::kMatchExpired, "assignment expired");
  }
  throw ArenaError(ErrorCode::kNotAssignedToJudge,
                   "match " + std::to_string(v.match) + " is not assigned to " + v.judge);
}

std::vector<Checkpoint> checkpoints_of(const CompetitionState& state_, Criterion criterion,
                                       int cadence) {
  if (cadence < 1) throw ArenaError(ErrorCode::kDomain, "cadence must be >= 1");
  std::vector<Checkpoint> out;
  auto order = state_.completion_order.find(criterion);
  if (order == state_.completion_order.end() || state_.agents.empty() ||
      state_.tasks.empty()) {
    return out;
  }
  std::map<TaskId, std::map<AgentId, Gaussian>> ratings;
  for (const auto& task : state_.tasks) {
    for (const auto& agent : state_.agents) ratings[task][agent] = state_.rating.prior();
  }
  long done = 0;
  for (MatchId id : order->second) {
    const Match& m = state_.matches.at(id);
    auto& table = ratings[m.task];
    const auto r = update_ratings(table[m.first], table[m.second],
                                  rating_outcome(final_verdict(m).outcome), state_.rating);
    table[m.first] = r.first;
    table[m.second] = r.second;
    if (++done % cadence == 0) {
      std::map<TaskId, std::map<AgentId, double>> raw;
      for (const auto& [task, by_agent] : ratings) {
        raw[task] = task_scores(by_agent, state_.engine.score);
      }
      out.push_back({done, ranking_of(build_leaderboard(raw, state_.tasks))});
    }
  }
  return out;
}

StabilityReport stability_of(const CompetitionState& state_, Criterion criterion,
                             const StabilityConfig& cfg) {
  const auto cps = checkpoints_of(state_, criterion, cfg.cadence);
  double max_dev = 0.0;
  for (const auto& task : state_.tasks) {
    for (const auto& agent : state_.agents) {
      max_dev = std::max(max_dev, state_.rating_of(criterion, task, agent).dev);
    }
  }
  auto order = state_.completion_order.find(criterion);
  const long completed =
      order == state_.completion_order.end() ? 0 : static_cast<long>(order->second.size());
  return evaluate_stability(cps, max_dev, completed, state_.agents.size(), cfg);
}

std::vector<Checkpoint> Competition::checkpoints(Criterion criterion, int cadence) const {
  return checkpoints_of(state_, criterion, cadence);
}

StabilityReport Competition::check_stability(Criterion criterion,
                                             const StabilityConfig& cfg) const {
  return stability_of(state_, criterion, cfg);
}

std::map<CoverageKey, long> Competition::coverage_report(Criterion criterion) const {
  std::map<CoverageKey, long> out;
  for (const auto& [id, m] : state_.matches) {
    if (m.criterion == criterion && m.status == MatchStatus::kCompleted) {
      ++out[{pair_key(m.first, m.second), m.task}];
    }
  }
  return out;
}

std::vector<LeaderboardRow> leaderboard_of(const CompetitionState& state, Criterion criterion) {
  auto ov = state.normalized_override.find(criterion);
  if (ov != state.normalized_override.end()) {
    if (ov->second.empty()) return {};
    return leaderboard_from_normalized(ov->second, state.tasks);
  }
  if (state.agents.empty() || state.tasks.empty()) return {};
  std::map<TaskId, std::map<AgentId, double>> raw;
  for (const auto& task : state.tasks) {
    std::map<AgentId, Gaussian> by_agent;
    for (const auto& agent : state.agents) {
      by_agent[agent] = state.rating_of(criterion, task, agent);
    }
    raw[task] = task_scores(by_agent, state.engine.score);
  }
  return build_leaderboard(raw, state.tasks);
}

std::vector<LeaderboardRow> Competition::leaderboard(Criterion criterion) const {
  return leaderboard_of(state_, criterion);
}

}  // namespace arena
