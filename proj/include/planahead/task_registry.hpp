#pragma once

#include "planahead/reward_matrix.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace planahead {

struct TaskSpec {
  std::string task_id;
  std::string goal;
  std::optional<std::string> domain_tag;
  std::string source;
};

class TaskRegistry {
 public:
  TaskRegistry() = default;
  explicit TaskRegistry(std::vector<TaskSpec> tasks);

  // Throws ValidationError on a duplicate id or an empty goal.
  void add(TaskSpec task);

  bool contains(std::string_view task_id) const;
  const TaskSpec& at(std::string_view task_id) const;
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::size_t size() const { return tasks_.size(); }

  // One JSON object per line: {"task_id", "goal", "domain_tag"?, "source"?}.
  static TaskRegistry read_jsonl(std::istream& in);

 private:
  std::vector<TaskSpec> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Difficulty { Easy, Medium, Hard };

std::string_view to_string(Difficulty label);

struct TaskDifficulty {
  std::string task_id;
  Difficulty label;
};

// Easy when every reward of the task (all models, all runs) is 1, Hard when
// every reward is 0, Medium otherwise. Output follows the matrix task order.
// Throws ValidationError("no tasks") on an empty matrix.
std::vector<TaskDifficulty> grade_difficulty(const RewardMatrix& matrix);

struct DifficultyCounts {
  std::size_t easy = 0;
  std::size_t medium = 0;
  std::size_t hard = 0;
};

DifficultyCounts count_labels(const std::vector<TaskDifficulty>& grading);
std::vector<std::string> tasks_with_label(const std::vector<TaskDifficulty>& grading, Difficulty label);

// Hard-set stability when only the first `runs` runs of every cell are used.
struct SensitivityRow {
  std::size_t runs = 0;
  std::size_t hard_count = 0;        // |Hard_n|
  std::size_t final_hard_count = 0;  // |Hard_N|
  std::size_t intersection = 0;      // |Hard_N ∩ Hard_n|
  // |Hard_N ∩ Hard_n| / |Hard_n| * 100; since Hard_N ⊆ Hard_n this equals
  // |Hard_N| / |Hard_n| * 100. Empty when Hard_n is empty.
  std::optional<double> overlap_pct;
  // |Hard_N ∩ Hard_n| / |Hard_N| * 100, the recall-style alternative.
  std::optional<double> final_coverage_pct;
};

// Throws ValidationError unless 1 <= runs <= matrix.runs().
SensitivityRow hard_set_sensitivity(const RewardMatrix& matrix, std::size_t runs);
std::vector<SensitivityRow> hard_set_sensitivity_table(const RewardMatrix& matrix);

}  // namespace planahead
