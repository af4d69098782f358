#include "arena/cli.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "arena/errors.hpp"
#include "arena/fixtures.hpp"
#include "arena/service.hpp"
#include "arena/simulation.hpp"
#include "arena/store.hpp"

namespace arena {

namespace {

constexpr const char* kDefaultDataDir = "arena-data";
constexpr const char* kDefaultId = "basalt-2021";

ArenaService* g_serving = nullptr;

void on_signal(int) {
  if (g_serving) g_serving->stop();
}

std::string resolve_dir(const std::string& positional, const std::string& flag) {
  if (!positional.empty()) return positional;
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ARENA_DATA_DIR"); env && *env) return env;
  return kDefaultDataDir;
}

std::string resolve_id(const fs::path& dir, const std::string& id) {
  if (!id.empty()) return id;
  const auto ids = list_competitions(dir);
  if (ids.size() == 1) return ids.front();
  if (ids.empty()) {
    throw ArenaError(ErrorCode::kNotFound, "no competition in " + dir.string());
  }
  throw ArenaError(ErrorCode::kSchemaViolation, "several competitions in " + dir.string() +
                                                    "; pass --id");
}

/// Opens (or creates) a competition whose events are appended to its log.
struct OpenCompetition {
  EventLog log;
  Competition comp;

  OpenCompetition(const fs::path& dir, const std::string& id)
      : log(log_path(dir, id)),
        comp(wall_clock_ms, [this](const Event& e) { log.append(e); }) {
    Recovery rec = recover(dir, id);
    comp = Competition::restore(std::move(rec.state), {}, wall_clock_ms,
                                [this](const Event& e) { log.append(e); });
  }
};

void print_table(std::ostream& out, const std::vector<TaskId>& tasks,
                 const std::vector<LeaderboardRow>& rows) {
  std::size_t name_w = 4;
  for (const auto& r : rows) name_w = std::max(name_w, r.agent.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-*s", "rank", static_cast<int>(name_w), "team");
  out << buf;
  for (const auto& t : tasks) out << "  " << t;
  out << "  average\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4d  %-*s", r.rank, static_cast<int>(name_w),
                  r.agent.c_str());
    out << buf;
    for (const auto& t : tasks) {
      std::snprintf(buf, sizeof buf, "  %*s", static_cast<int>(t.size()),
                    format_2dp(r.per_task.at(t)).c_str());
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "  %7s\n", format_2dp(r.overall).c_str());
    out << buf;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pairwise human-evaluation arena: competitions, ratings and leaderboards",
               "arena"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // init
  std::string init_dir, init_flag_dir, init_id = kDefaultId, init_name;
  std::vector<std::string> init_criteria{"task-completion", "human-likeness"};
  std::uint64_t init_seed = 0;
  auto* init = app.add_subcommand("init", "Create a data directory and an empty competition");
  init->add_option("dir", init_dir, "Data directory");
  init->add_option("--data-dir", init_flag_dir, "Data directory");
  init->add_option("--id", init_id, "Competition id")->capture_default_str();
  init->add_option("--name", init_name, "Display name (defaults to the id)");
  init->add_option("--criteria", init_criteria, "Enabled criteria")
      ->delimiter(',')
      ->capture_default_str();
  init->add_option("--rng-seed", init_seed, "Scheduler seed")->capture_default_str();

  // import
  std::string imp_dir, imp_flag_dir, imp_id = kDefaultId, imp_fixture, imp_criterion =
                                                                          "task-completion";
  auto* imp = app.add_subcommand("import", "Load a shipped score fixture into a competition");
  imp->add_option("--fixture", imp_fixture, "Fixture name")
      ->required()
      ->check(CLI::IsMember({"table1"}));
  imp->add_option("dir", imp_dir, "Data directory");
  imp->add_option("--data-dir", imp_flag_dir, "Data directory");
  imp->add_option("--id", imp_id, "Competition id (created when missing)")->capture_default_str();
  imp->add_option("--criterion", imp_criterion, "Criterion receiving the scores")
      ->check(CLI::IsMember({"task-completion", "human-likeness"}))
      ->capture_default_str();

  // serve
  std::string srv_addr, srv_dir, srv_token;
  std::int64_t srv_snapshot = 1000;
  long srv_cap = 0;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--addr", srv_addr, "Listen address host:port (env ARENA_ADDR)");
  serve->add_option("--data-dir", srv_dir, "Data directory (env ARENA_DATA_DIR)");
  serve->add_option("--admin-token", srv_token, "Admin bearer token (env ARENA_ADMIN_TOKEN)");
  serve->add_option("--snapshot-every", srv_snapshot, "Events between snapshots")
      ->capture_default_str();
  serve->add_option("--request-cap", srv_cap, "Requests per token per minute, 0 = unlimited")
      ->capture_default_str();

  // leaderboard
  std::string lb_dir, lb_flag_dir, lb_id, lb_criterion = "task-completion", lb_format = "table";
  auto* lb = app.add_subcommand("leaderboard", "Print the leaderboard");
  lb->add_option("dir", lb_dir, "Data directory");
  lb->add_option("--data-dir", lb_flag_dir, "Data directory");
  lb->add_option("--id", lb_id, "Competition id (optional when only one exists)");
  lb->add_option("--criterion", lb_criterion, "Criterion")
      ->check(CLI::IsMember({"task-completion", "human-likeness"}))
      ->capture_default_str();
  lb->add_option("--format", lb_format, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();

  // simulate
  int sim_agents = 11, sim_tasks = 4, sim_seeds = 5, sim_judges = 20;
  long sim_budget = 3000;
  std::string sim_policy = "uncertainty-greedy", sim_out, sim_csv;
  std::uint64_t sim_seed = 1;
  double sim_noise = 25.0 / 6.0, sim_flip = 0.05, sim_band = 0.0;
  bool sim_stop = false;
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic-judge experiment");
  simulate->add_option("--agents", sim_agents, "Number of agents")->capture_default_str();
  simulate->add_option("--tasks", sim_tasks, "Number of tasks")->capture_default_str();
  simulate->add_option("--seeds-per-task", sim_seeds, "Seeds per task")->capture_default_str();
  simulate->add_option("--budget", sim_budget, "Maximum comparisons")->capture_default_str();
  simulate->add_option("--policy", sim_policy, "Scheduler policy")
      ->check(CLI::IsMember({"uniform-random", "uniform", "round-robin-pairs", "round-robin",
                             "uncertainty-greedy", "greedy"}))
      ->capture_default_str();
  simulate->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  simulate->add_option("--judges", sim_judges, "Synthetic judges")->capture_default_str();
  simulate->add_option("--noise", sim_noise, "Judge performance deviation")->capture_default_str();
  simulate->add_option("--flip", sim_flip, "Judge error rate")->capture_default_str();
  simulate->add_option("--draw-band", sim_band, "Draw band")->capture_default_str();
  simulate->add_flag("--stop-on-stability", sim_stop, "Stop once the stability gate passes");
  simulate->add_option("--out", sim_out, "Write the JSON report here (default stdout)");
  simulate->add_option("--csv", sim_csv, "Write the trajectory CSV here");

  // replay-check
  std::string rc_log;
  auto* rc = app.add_subcommand("replay-check",
                                "Replay an event log and verify it against its snapshots");
  rc->add_option("log", rc_log, "Path to <id>.events.jsonl")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*init) {
      const fs::path dir = resolve_dir(init_dir, init_flag_dir);
      fs::create_directories(dir);
      if (fs::exists(log_path(dir, init_id))) {
        throw ArenaError(ErrorCode::kDuplicate, "competition '" + init_id + "' exists");
      }
      CreateOptions o;
      o.id = init_id;
      o.name = init_name;
      o.criteria.clear();
      for (const auto& c : init_criteria) o.criteria.push_back(criterion_from_string(c));
      o.rng_seed = init_seed;
      {
        Competition probe(wall_clock_ms);
        probe.create(o);
      }
      OpenCompetition oc(dir, init_id);
      oc.comp.create(o);
      out << "created " << init_id << " in " << dir.string() << "\n";
      return 0;
    }

    if (*imp) {
      const fs::path dir = resolve_dir(imp_dir, imp_flag_dir);
      fs::create_directories(dir);
      OpenCompetition oc(dir, imp_id);
      if (!oc.comp.state().created()) {
        CreateOptions o;
        o.id = imp_id;
        o.criteria = {Criterion::kTaskCompletion, Criterion::kHumanLikeness};
        oc.comp.create(o);
      }
      fixtures::import_table1(oc.comp, criterion_from_string(imp_criterion));
      out << "imported " << imp_fixture << " into " << imp_id << " ("
          << fixtures::table1_rows().size() << " teams, " << fixtures::basalt_tasks().size()
          << " tasks)\n";
      return 0;
    }

    if (*serve) {
      ServiceConfig cfg = ServiceConfig::from_env();
      if (!srv_addr.empty()) cfg.addr = srv_addr;
      if (!srv_dir.empty()) cfg.data_dir = srv_dir;
      if (!srv_token.empty()) cfg.admin_token = srv_token;
      cfg.snapshot_every = srv_snapshot;
      cfg.request_cap_per_minute = srv_cap;
      if (cfg.admin_token.empty()) {
        cfg.admin_token = generate_token();
        err << "admin token: " << cfg.admin_token << "\n";
      }
      ArenaService service(cfg);
      const auto [host, port] = split_addr(cfg.addr);
      const int bound = service.bind(host, port);
      err << "listening on " << host << ":" << bound << " with " << service.competition_count()
          << " competition(s) from " << cfg.data_dir.string() << "\n";
      g_serving = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen_after_bind();
      g_serving = nullptr;
      return 0;
    }

    if (*lb) {
      const fs::path dir = resolve_dir(lb_dir, lb_flag_dir);
      const std::string id = resolve_id(dir, lb_id);
      if (!fs::exists(log_path(dir, id))) {
        throw ArenaError(ErrorCode::kNotFound, "unknown competition '" + id + "'");
      }
      const CompetitionState state = recover(dir, id).state;
      const Criterion crit = criterion_from_string(lb_criterion);
      if (lb_format == "table") {
        print_table(out, state.tasks, leaderboard_of(state, crit));
      } else {
        out << export_leaderboard(state, crit, export_format_from_string(lb_format));
      }
      return 0;
    }

    if (*simulate) {
      sim::SimConfig cfg;
      cfg.n_agents = sim_agents;
      cfg.tasks.clear();
      for (int t = 0; t < sim_tasks; ++t) cfg.tasks.push_back("task-" + std::to_string(t + 1));
      cfg.seeds_per_task = sim_seeds;
      cfg.budget = sim_budget;
      cfg.policy = policy_from_string(sim_policy);
      cfg.rng_seed = sim_seed;
      cfg.n_judges = sim_judges;
      cfg.judge_noise = sim_noise;
      cfg.flip_rate = sim_flip;
      cfg.draw_band = sim_band;
      cfg.stop_on_stability = sim_stop;
      const auto report = sim::run_experiment(cfg);
      const std::string doc = sim::report_to_json(report).dump(2) + "\n";
      if (sim_out.empty()) {
        out << doc;
      } else {
        std::ofstream f(sim_out);
        if (!(f << doc)) throw ArenaError(ErrorCode::kStorageFailure, "cannot write " + sim_out);
        out << "comparisons " << report.comparisons_used << ", final tau "
            << (report.final_tau ? std::to_string(*report.final_tau) : "n/a") << ", stabilized at "
            << (report.stabilized_at ? std::to_string(*report.stabilized_at) : "never") << "\n";
      }
      if (!sim_csv.empty()) {
        std::ofstream f(sim_csv);
        if (!(f << sim::trajectory_csv(report))) {
          throw ArenaError(ErrorCode::kStorageFailure, "cannot write " + sim_csv);
        }
      }
      return 0;
    }

    if (*rc) {
      const fs::path log = rc_log;
      if (!fs::exists(log)) throw ArenaError(ErrorCode::kNotFound, "no such log " + log.string());
      const auto events = read_events(log);
      CompetitionState state;
      const std::string name = log.filename().string();
      const std::string suffix = ".events.jsonl";
      std::vector<std::int64_t> snaps;
      std::string id;
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        id = name.substr(0, name.size() - suffix.size());
        snaps = list_snapshots(log.parent_path().empty() ? fs::path(".") : log.parent_path(), id);
      }
      std::size_t next_snap = 0;
      int checked = 0;
      for (const auto& e : events) {
        apply_event(state, e);
        while (next_snap < snaps.size() && snaps[next_snap] <= e.seq) {
          if (snaps[next_snap] == e.seq) {
            const fs::path dir = log.parent_path().empty() ? fs::path(".") : log.parent_path();
            const auto snap = read_snapshot(snapshot_path(dir, id, e.seq));
            if (canonical_state(snap) != canonical_state(state)) {
              err << "snapshot at seq " << e.seq << " disagrees with replayed state\n";
              return 1;
            }
            ++checked;
          }
          ++next_snap;
        }
      }
      if (next_snap < snaps.size()) {
        err << "warning: snapshot beyond end of log (seq " << snaps[next_snap] << ")\n";
      }
      // Round trip through the canonical form must be lossless.
      if (canonical_state(state_from_json(state_to_json(state))) != canonical_state(state)) {
        err << "canonical state does not round-trip\n";
        return 1;
      }
      out << events.size() << " events, state OK";
      if (checked > 0) out << " (" << checked << " snapshot(s) verified)";
      out << "\n";
      return 0;
    }
  } catch (const CorruptLogError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ArenaError& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace arena
