#pragma once

#include "planahead/executor.hpp"
#include "planahead/reward_matrix.hpp"
#include "planahead/run_log.hpp"
#include "planahead/task_registry.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace planahead {

struct EpisodeSettings {
  ExecutorConfig executor;  // mode is taken from the grid
  double planner_temperature = 0.6;
  std::size_t planner_retry_budget = 2;
};

struct RunOptions {
  std::filesystem::path out_dir;
  // Called after each record is durably appended, with the number written so
  // far in this session. Runs on a worker thread.
  std::function<void(const RunLogRecord&, std::size_t)> on_record;
  // Stop taking new units once this many records were written this session.
  std::optional<std::size_t> stop_after;
  // Strings to redact from the request log.
  std::vector<std::string> secrets;
};

struct WorkUnit {
  GridCell cell;
  std::string task_id;
  std::size_t run_index = 0;
};

struct UnitFailure {
  WorkUnit unit;
  std::string error;
};

struct RunSummary {
  std::size_t planned = 0;   // units in the grid
  std::size_t skipped = 0;   // already recorded before this session
  std::size_t executed = 0;  // recorded in this session
  std::vector<UnitFailure> failures;
  bool interrupted = false;
};

// Seed of run `run` of `task` in `cell`: distinct per unit, fixed by the grid seed.
std::uint64_t episode_seed(std::uint64_t grid_seed, const GridCell& cell, std::string_view task_id, std::size_t run);

// Every unit of the grid in execution order: a Fisher-Yates shuffle of the
// canonical order (cells, tasks, runs) driven by the grid seed.
std::vector<WorkUnit> schedule(const ExperimentGrid& grid);

// Executes every unit not yet recorded under options.out_dir. Checks models,
// tasks and the grid before any episode. A unit whose model calls fail is
// reported in RunSummary::failures and left unrecorded so a later resume
// retries it; unparseable model output and environment failures are recorded
// as reward-0 episodes with termination Error.
RunSummary run_grid(const ExperimentGrid& grid, const TaskRegistry& registry, ModelGateway& gateway,
                    const EnvironmentFactory& environments, const EpisodeSettings& settings,
                    const RunOptions& options);

// T x 1 x N matrix (task order as given, model id = cell key). Throws
// ValidationError naming every missing (task, run).
RewardMatrix aggregate(const RunLog& log, const GridCell& cell, const std::vector<std::string>& task_ids,
                       std::size_t runs);
// Uses the task list and run count of the grid that declares the cell.
RewardMatrix aggregate(const RunLog& log, const GridCell& cell);

}  // namespace planahead
