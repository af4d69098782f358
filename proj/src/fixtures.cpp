#include "arena/fixtures.hpp"

namespace arena::fixtures {

const std::vector<std::string>& basalt_tasks() {
  static const std::vector<std::string> tasks{"FindCave", "MakeWaterfall",
                                              "CreateVillageAnimalPen", "BuildVillageHouse"};
  return tasks;
}

const std::vector<Table1Row>& table1_rows() {
  static const std::vector<Table1Row> rows{
      {"KAIROS", {-0.23, 2.81, 0.15, -0.06}, 0.67},
      {"obsidian", {1.07, 0.21, 1.00, 0.15}, 0.61},
      {"NotYourRL", {0.44, 0.13, 1.59, 0.03}, 0.55},
      {"mina", {0.80, -0.71, -0.08, 0.18}, 0.05},
      {"yamato.kataoka", {-0.17, 0.00, -0.24, 0.00}, -0.10},
      {"Reforcos_de_Minecraft", {-0.60, 0.18, -0.25, -0.03}, -0.17},
      {"UEF", {-0.19, -0.49, -0.03, -0.05}, -0.19},
      {"Baseline", {-0.26, -0.43, -0.04, -0.12}, -0.21},
      {"chrischongtt", {-0.60, -0.32, -0.20, -0.06}, -0.30},
      {"Granite", {0.10, -0.61, -1.12, 0.00}, -0.41},
      {"PA-P", {-0.36, -0.76, -0.79, -0.05}, -0.49},
  };
  return rows;
}

std::map<AgentId, std::map<TaskId, double>> table1_normalized() {
  std::map<AgentId, std::map<TaskId, double>> out;
  const auto& tasks = basalt_tasks();
  for (const auto& row : table1_rows()) {
    for (std::size_t i = 0; i < tasks.size(); ++i) out[row.team][tasks[i]] = row.per_task[i];
  }
  return out;
}

void import_table1(Competition& competition, Criterion criterion) {
  const auto& state = competition.state();
  for (const auto& task : basalt_tasks()) {
    if (!state.has_task(task)) competition.register_task(task);
  }
  for (const auto& row : table1_rows()) {
    if (!state.has_agent(row.team)) competition.register_agent(row.team);
  }
  json scores = json::object();
  for (const auto& [team, by_task] : table1_normalized()) scores[team] = by_task;
  competition.update_config({{"normalized_scores", {{to_string(criterion), scores}}}});
}

}  // namespace arena::fixtures
