#pragma once

#include "planahead/executor.hpp"
#include "planahead/model_gateway.hpp"
#include "planahead/plan_engine.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace planahead {

// One (planner, executor, representation, mode) combination of a grid.
struct GridCell {
  std::string planner_id;
  std::string executor_id;
  PlanRepresentation representation = PlanRepresentation::SequentialSubgoals;
  ExecutionMode mode = ExecutionMode::Static;

  // File-name safe, e.g. "static__checklist__gpt-4o__qwen".
  std::string key() const;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

struct ExperimentGrid {
  std::vector<std::string> planner_ids;
  std::vector<std::string> executor_ids;
  std::vector<PlanRepresentation> representations;
  std::vector<std::string> task_ids;
  std::size_t runs = 5;
  ExecutionMode mode = ExecutionMode::Static;
  std::uint64_t seed = 0;
  std::size_t worker_count = 1;

  // Non-empty axes without duplicates, runs >= 1, workers >= 1. Dynamic
  // grids are single-agent (each planner paired with the same executor) and
  // sequential only.
  void validate() const;
  // Static: planners x executors x representations. Dynamic: one cell per
  // model in planner_ids.
  std::vector<GridCell> cells() const;
  // Grids are compatible for resuming when everything but worker_count agrees.
  bool same_experiment(const ExperimentGrid& other) const;
};

struct RunLogRecord {
  GridCell cell;
  std::string task_id;
  std::size_t run_index = 0;
  int reward = 0;
  Termination termination = Termination::Error;
  std::size_t steps = 0;
  std::size_t planner_calls = 0;
  std::size_t executor_calls = 0;
  std::string trace_digest;  // name of traces/<digest>.jsonl
  std::uint64_t seed = 0;
  TokenUsage usage;
  double wall_time_s = 0.0;

  // (cell key, task, run) identifies a unit of work.
  std::tuple<std::string, std::string, std::size_t> unit_key() const { return {cell.key(), task_id, run_index}; }
  // SHA-256 of the canonical record without wall_time_s.
  std::string content_digest() const;
};

std::string record_to_json_line(const RunLogRecord& record);
RunLogRecord record_from_json_line(std::string_view line);

std::string grid_to_json(const ExperimentGrid& grid);
ExperimentGrid grid_from_json(std::string_view text);

// On-disk layout of one run directory:
//   manifest.json          the grid
//   cells/<cell key>.jsonl one record per line
//   traces/<sha256>.jsonl  content-addressed episode traces
//   requests.jsonl         model attempts, one contiguous block per episode
namespace layout {
std::filesystem::path manifest(const std::filesystem::path& dir);
std::filesystem::path cell_file(const std::filesystem::path& dir, const GridCell& cell);
std::filesystem::path trace_file(const std::filesystem::path& dir, std::string_view digest);
std::filesystem::path request_log(const std::filesystem::path& dir);
}  // namespace layout

// Reads one cell file (missing file: no records). A final line without its newline is a
// record cut short by a crash and is ignored; any other bad line throws.
struct CellFileContents {
  std::vector<RunLogRecord> records;
  bool truncated_tail = false;
};
CellFileContents read_cell_file(const std::filesystem::path& path);

// Everything found in one or more run directories.
struct RunLog {
  std::vector<ExperimentGrid> grids;
  std::vector<RunLogRecord> records;

  static RunLog load(const std::filesystem::path& dir);
  void merge(RunLog other);

  std::set<std::string> content_digests() const;
};

}  // namespace planahead
