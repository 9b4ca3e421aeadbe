#include "planahead/task_registry.hpp"

#include "planahead/error.hpp"

#include <json.hpp>

#include <istream>

namespace planahead {

TaskRegistry::TaskRegistry(std::vector<TaskSpec> tasks) {
  for (auto& task : tasks) add(std::move(task));
}

void TaskRegistry::add(TaskSpec task) {
  if (task.task_id.empty()) throw ValidationError("task id must not be empty");
  if (task.goal.empty()) throw ValidationError("task " + task.task_id + " has an empty goal");
  if (!index_.emplace(task.task_id, tasks_.size()).second) {
    throw ValidationError("duplicate task id: " + task.task_id);
  }
  tasks_.push_back(std::move(task));
}

bool TaskRegistry::contains(std::string_view task_id) const { return index_.count(std::string(task_id)) != 0; }

const TaskSpec& TaskRegistry::at(std::string_view task_id) const {
  auto it = index_.find(std::string(task_id));
  if (it == index_.end()) throw ValidationError("unknown task: " + std::string(task_id));
  return tasks_[it->second];
}

TaskRegistry TaskRegistry::read_jsonl(std::istream& in) {
  TaskRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      TaskSpec task;
      task.task_id = j.at("task_id").get<std::string>();
      task.goal = j.at("goal").get<std::string>();
      if (j.contains("domain_tag") && !j["domain_tag"].is_null()) task.domain_tag = j["domain_tag"].get<std::string>();
      task.source = j.value("source", std::string());
      registry.add(std::move(task));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("task file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return registry;
}

std::string_view to_string(Difficulty label) {
  switch (label) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Hard: return "Hard";
  }
  return "?";
}

std::vector<TaskDifficulty> grade_difficulty(const RewardMatrix& matrix) {
  if (matrix.empty()) throw ValidationError("no tasks");
  std::vector<TaskDifficulty> out;
  out.reserve(matrix.task_count());
  for (std::size_t t = 0; t < matrix.task_count(); ++t) {
    bool all_success = true;
    bool all_failure = true;
    for (std::size_t m = 0; m < matrix.model_count(); ++m) {
      for (auto r : matrix.row(t, m)) {
        all_success = all_success && r == 1;
        all_failure = all_failure && r == 0;
      }
    }
    const Difficulty label = all_success ? Difficulty::Easy : all_failure ? Difficulty::Hard : Difficulty::Medium;
    out.push_back({matrix.task_ids()[t], label});
  }
  return out;
}

DifficultyCounts count_labels(const std::vector<TaskDifficulty>& grading) {
  DifficultyCounts counts;
  for (const auto& g : grading) {
    switch (g.label) {
      case Difficulty::Easy: ++counts.easy; break;
      case Difficulty::Medium: ++counts.medium; break;
      case Difficulty::Hard: ++counts.hard; break;
    }
  }
  return counts;
}

std::vector<std::string> tasks_with_label(const std::vector<TaskDifficulty>& grading, Difficulty label) {
  std::vector<std::string> out;
  for (const auto& g : grading) {
    if (g.label == label) out.push_back(g.task_id);
  }
  return out;
}

SensitivityRow hard_set_sensitivity(const RewardMatrix& matrix, std::size_t runs) {
  if (runs < 1 || runs > matrix.runs()) {
    throw ValidationError("run prefix " + std::to_string(runs) + " out of range [1, " +
                          std::to_string(matrix.runs()) + "]");
  }
  const auto full = grade_difficulty(matrix);
  const auto prefix = grade_difficulty(matrix.run_prefix(runs));

  SensitivityRow row;
  row.runs = runs;
  for (std::size_t t = 0; t < full.size(); ++t) {
    const bool hard_full = full[t].label == Difficulty::Hard;
    const bool hard_prefix = prefix[t].label == Difficulty::Hard;
    row.final_hard_count += hard_full ? 1 : 0;
    row.hard_count += hard_prefix ? 1 : 0;
    row.intersection += (hard_full && hard_prefix) ? 1 : 0;
  }
  if (row.hard_count > 0) {
    row.overlap_pct = 100.0 * static_cast<double>(row.intersection) / static_cast<double>(row.hard_count);
  }
  if (row.final_hard_count > 0) {
    row.final_coverage_pct =
        100.0 * static_cast<double>(row.intersection) / static_cast<double>(row.final_hard_count);
  }
  return row;
}

std::vector<SensitivityRow> hard_set_sensitivity_table(const RewardMatrix& matrix) {
  std::vector<SensitivityRow> rows;
  for (std::size_t n = 1; n <= matrix.runs(); ++n) rows.push_back(hard_set_sensitivity(matrix, n));
  return rows;
}

}  // namespace planahead
