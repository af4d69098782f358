#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "arena/engine.hpp"
#include "arena/errors.hpp"

namespace arena::testing {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("arena-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct FakeClock {
  std::int64_t now = 1'700'000'000'000;
  Clock fn() {
    return [this] { return now; };
  }
};

/// Registers agents, tasks, seeds and judges with names derived from counts.
inline void populate(Competition& comp, int agents, int tasks, int seeds, int judges) {
  for (int i = 0; i < agents; ++i) comp.register_agent("agent" + std::to_string(i));
  for (int t = 0; t < tasks; ++t) {
    comp.register_task("task" + std::to_string(t));
    for (int s = 0; s < seeds; ++s) {
      comp.register_seed("task" + std::to_string(t), "seed" + std::to_string(s));
    }
  }
  for (int j = 0; j < judges; ++j) {
    comp.register_judge("judge" + std::to_string(j), "token" + std::to_string(j));
  }
}

inline CreateOptions basic_options(std::uint64_t seed = 1) {
  CreateOptions o;
  o.id = "comp";
  o.criteria = {Criterion::kTaskCompletion, Criterion::kHumanLikeness};
  o.rng_seed = seed;
  o.engine.deadline_ms = 60'000;
  return o;
}

/// Random interleaving of scheduling, verdicts, skips, expiries and late
/// registrations. Returns the number of accepted non-skip verdicts.
inline int random_session(Competition& comp, FakeClock& clock, std::mt19937_64& rng,
                          int steps) {
  const auto& st = comp.state();
  std::vector<JudgeId> judges;
  for (const auto& [j, info] : st.judges) judges.push_back(j);
  int accepted = 0;
  for (int step = 0; step < steps; ++step) {
    clock.now += 1 + static_cast<std::int64_t>(rng() % 5000);
    const JudgeId judge = judges[rng() % judges.size()];
    const Criterion crit = st.criteria[rng() % st.criteria.size()];
    const int op = static_cast<int>(rng() % 100);
    try {
      if (op < 55) {
        const Match m = comp.next_match(crit, judge);
        const int r = static_cast<int>(rng() % 10);
        if (r < 7) {
          const VerdictOutcome o = static_cast<VerdictOutcome>(rng() % 4);
          const auto res = comp.submit_outcome({m.id, judge, o});
          if (res.applied && o != VerdictOutcome::kSkip) ++accepted;
          if (rng() % 4 == 0) comp.submit_outcome({m.id, judge, o});  // redelivery
        } else if (r == 7) {
          clock.now += comp.state().engine.deadline_ms + 1;  // abandon
        }
      } else if (op < 70) {
        comp.expire_overdue();
      } else if (op < 80 && !st.matches.empty()) {
        // Stray submission against an arbitrary match.
        auto it = st.matches.begin();
        std::advance(it, rng() % st.matches.size());
        const VerdictOutcome o = static_cast<VerdictOutcome>(rng() % 4);
        const auto res = comp.submit_outcome({it->first, judge, o});
        if (res.applied && o != VerdictOutcome::kSkip) ++accepted;
      } else if (op < 83) {
        comp.register_agent("late" + std::to_string(step));
      } else if (op < 85) {
        comp.register_seed(st.tasks[rng() % st.tasks.size()], "extra" + std::to_string(step));
      } else if (op < 86) {
        comp.update_config({{"engine", {{"grace_ms", static_cast<int>(rng() % 1000)}}}});
      } else {
        const Match m = comp.next_match(crit, judge);
        (void)m;
      }
    } catch (const CorruptLogError&) {
      throw;
    } catch (const ArenaError&) {
    }
  }
  return accepted;
}

}  // namespace arena::testing
