#pragma once

// The published BASALT 2021 leaderboard as a normalized-score fixture.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "arena/engine.hpp"

namespace arena::fixtures {

struct Table1Row {
  const char* team;
  std::array<double, 4> per_task;  // FindCave, MakeWaterfall, CreateVillageAnimalPen, BuildVillageHouse
  double average;                  // as printed (two decimals)
};

/// Task ids in column order.
const std::vector<std::string>& basalt_tasks();

/// The eleven published rows, in published order.
const std::vector<Table1Row>& table1_rows();

/// team -> task -> normalized score.
std::map<AgentId, std::map<TaskId, double>> table1_normalized();

/// Registers the four tasks and eleven teams on an already created
/// competition and injects the published normalized scores for `criterion`.
/// Rating is bypassed entirely.
void import_table1(Competition& competition,
                   Criterion criterion = Criterion::kTaskCompletion);

}  // namespace arena::fixtures
