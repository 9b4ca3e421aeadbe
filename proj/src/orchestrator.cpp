#include "planahead/orchestrator.hpp"

#include "planahead/digest.hpp"
#include "planahead/metrics.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace planahead {

namespace fs = std::filesystem;

namespace {

using UnitKey = std::tuple<std::string, std::string, std::size_t>;

void write_file_atomically(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = path.string() + ".tmp" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Checks or writes the manifest, drops torn trailing lines and returns the
// units already on disk.
std::set<UnitKey> prepare_out_dir(const ExperimentGrid& grid, const fs::path& dir) {
  fs::create_directories(dir / "cells");
  fs::create_directories(dir / "traces");
  const auto manifest = layout::manifest(dir);
  if (fs::exists(manifest)) {
    if (!grid_from_json(read_file(manifest)).same_experiment(grid)) {
      throw ValidationError(dir.string() + " holds records of a different grid");
    }
  } else {
    write_file_atomically(manifest, grid_to_json(grid) + "\n");
  }
  std::set<UnitKey> done;
  for (const auto& cell : grid.cells()) {
    const auto path = layout::cell_file(dir, cell);
    auto contents = read_cell_file(path);
    if (contents.truncated_tail) {
      std::string kept;
      for (const auto& r : contents.records) kept += record_to_json_line(r) + "\n";
      write_file_atomically(path, kept);
    }
    for (const auto& r : contents.records) {
      if (r.cell != cell) throw ValidationError("record in " + path.string() + " belongs to " + r.cell.key());
      if (!done.insert(r.unit_key()).second) throw ValidationError("duplicate record in " + path.string());
    }
  }
  return done;
}

class GridRunner {
 public:
  GridRunner(const ExperimentGrid& grid, const TaskRegistry& registry, ModelGateway& gateway,
             const EnvironmentFactory& environments, const EpisodeSettings& settings, const RunOptions& options)
      : grid_(grid),
        registry_(registry),
        gateway_(gateway),
        environments_(environments),
        settings_(settings),
        options_(options),
        requests_(layout::request_log(options.out_dir).string(), options.secrets) {}

  void run(const std::vector<WorkUnit>& units, RunSummary& summary) {
    const auto workers = std::max<std::size_t>(1, std::min(grid_.worker_count, units.size()));
    std::atomic<std::size_t> next{0};
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          while (!stop_.load()) {
            const auto i = next.fetch_add(1);
            if (i >= units.size()) return;
            try {
              execute(units[i], summary);
            } catch (const std::exception& e) {
              std::lock_guard lock(mu_);
              summary.failures.push_back({units[i], std::string("persisting the episode failed: ") + e.what()});
            }
          }
        });
      }
    }
    summary.interrupted = next.load() < units.size() && stop_.load();
  }

 private:
  void execute(const WorkUnit& unit, RunSummary& summary) {
    const auto started = std::chrono::steady_clock::now();
    const auto seed = episode_seed(grid_.seed, unit.cell, unit.task_id, unit.run_index);
    EpisodeClient client(gateway_, unit.cell.key() + "/" + unit.task_id + "/" + std::to_string(unit.run_index));
    EpisodeTrace trace;
    try {
      trace = run_episode(unit, seed, client);
    } catch (const std::exception& e) {
      // Model failures leave the unit unrecorded; its attempts are still logged.
      requests_.record_block(client.attempts());
      std::lock_guard lock(mu_);
      summary.failures.push_back({unit, e.what()});
      return;
    }

    const auto trace_text = trace_to_jsonl(trace);
    const auto digest = sha256_hex(trace_text);
    const auto trace_path = layout::trace_file(options_.out_dir, digest);
    if (!fs::exists(trace_path)) write_file_atomically(trace_path, trace_text);
    requests_.record_block(client.attempts());

    RunLogRecord record;
    record.cell = unit.cell;
    record.task_id = unit.task_id;
    record.run_index = unit.run_index;
    record.reward = trace.final_reward;
    record.termination = trace.termination;
    record.steps = trace.steps.size();
    record.planner_calls = trace.planner_calls;
    record.executor_calls = trace.executor_calls;
    record.trace_digest = digest;
    record.seed = seed;
    record.usage = client.usage();
    record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    append(record, summary);
  }

  EpisodeTrace run_episode(const WorkUnit& unit, std::uint64_t seed, EpisodeClient& client) {
    const auto& spec = registry_.at(unit.task_id);
    const EpisodeTask task{spec.task_id, spec.goal};
    ExecutorConfig config = settings_.executor;
    config.mode = unit.cell.mode;
    config.seed = seed;

    auto failed = [&](std::string error) {
      EpisodeTrace t;
      t.task_id = task.task_id;
      t.goal = task.goal;
      t.mode = config.mode;
      t.planner_model_id = unit.cell.planner_id;
      t.executor_model_id = unit.cell.executor_id;
      t.termination = Termination::Error;
      t.error = std::move(error);
      return t;
    };

    std::unique_ptr<Environment> env;
    Observation initial;
    try {
      env = environments_();
      initial = env->reset(task.task_id);
    } catch (const Error& e) {
      return failed(std::string("environment reset failed: ") + e.what());
    }

    if (config.mode == ExecutionMode::Dynamic) {
      return run_dynamic_episode(config, task, *env, initial, client, unit.cell.planner_id, unit.cell.executor_id);
    }
    if (!initial.screenshot || initial.screenshot->empty()) {
      return failed("environment gave no screenshot for the planner");
    }
    PlannerRequest request{unit.cell.representation, task.goal, *initial.screenshot, settings_.planner_temperature,
                           seed};
    Plan plan;
    try {
      plan = generate_plan(client, unit.cell.planner_id, request, settings_.planner_retry_budget);
    } catch (const PlanGenerationFailed& e) {
      auto t = failed(e.what());
      t.planner_calls = e.calls();
      return t;
    }
    auto trace = run_static_episode(config, task, plan, *env, initial, client, unit.cell.executor_id);
    trace.planner_calls = plan.retries + 1;
    return trace;
  }

  void append(const RunLogRecord& record, RunSummary& summary) {
    std::size_t written = 0;
    {
      std::lock_guard lock(mu_);
      auto& out = cell_streams_[record.cell.key()];
      if (!out.is_open()) {
        out.open(layout::cell_file(options_.out_dir, record.cell), std::ios::app | std::ios::binary);
        if (!out) throw Error("cannot append to cell file for " + record.cell.key());
      }
      out << record_to_json_line(record) << '\n';
      out.flush();
      written = ++summary.executed;
      if (options_.stop_after && written >= *options_.stop_after) stop_.store(true);
    }
    if (options_.on_record) options_.on_record(record, written);
  }

  const ExperimentGrid& grid_;
  const TaskRegistry& registry_;
  ModelGateway& gateway_;
  const EnvironmentFactory& environments_;
  const EpisodeSettings& settings_;
  const RunOptions& options_;
  JsonlAttemptLog requests_;
  std::mutex mu_;
  std::map<std::string, std::ofstream> cell_streams_;
  std::atomic<bool> stop_{false};
};

}  // namespace

std::uint64_t episode_seed(std::uint64_t grid_seed, const GridCell& cell, std::string_view task_id, std::size_t run) {
  const auto hex = sha256_hex(std::to_string(grid_seed) + "|" + cell.key() + "|" + std::string(task_id) + "|" +
                              std::to_string(run));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::vector<WorkUnit> schedule(const ExperimentGrid& grid) {
  std::vector<WorkUnit> units;
  for (const auto& cell : grid.cells()) {
    for (const auto& task : grid.task_ids) {
      for (std::size_t run = 0; run < grid.runs; ++run) units.push_back({cell, task, run});
    }
  }
  BootstrapStream rng(grid.seed, 0);
  for (std::size_t i = units.size(); i > 1; --i) std::swap(units[i - 1], units[rng.below(i)]);
  return units;
}

RunSummary run_grid(const ExperimentGrid& grid, const TaskRegistry& registry, ModelGateway& gateway,
                    const EnvironmentFactory& environments, const EpisodeSettings& settings,
                    const RunOptions& options) {
  grid.validate();
  settings.executor.validate();
  if (!environments) throw ValidationError("run_grid needs an environment factory");
  if (options.out_dir.empty()) throw ValidationError("run_grid needs an output directory");
  for (const auto& ids : {grid.planner_ids, grid.executor_ids}) {
    for (const auto& id : ids) {
      if (!gateway.has_model(id)) throw ConfigError("no provider configured for model '" + id + "'");
    }
  }
  for (const auto& t : grid.task_ids) {
    if (!registry.contains(t)) throw ValidationError("unknown task '" + t + "'");
  }

  const auto done = prepare_out_dir(grid, options.out_dir);
  RunSummary summary;
  std::vector<WorkUnit> pending;
  for (auto& unit : schedule(grid)) {
    ++summary.planned;
    if (done.count({unit.cell.key(), unit.task_id, unit.run_index})) {
      ++summary.skipped;
    } else {
      pending.push_back(std::move(unit));
    }
  }
  if (pending.empty()) return summary;
  GridRunner(grid, registry, gateway, environments, settings, options).run(pending, summary);
  return summary;
}

RewardMatrix aggregate(const RunLog& log, const GridCell& cell, const std::vector<std::string>& task_ids,
                       std::size_t runs) {
  if (task_ids.empty()) throw ValidationError("aggregate needs at least one task");
  if (runs < 1) throw ValidationError("aggregate needs at least one run");
  std::map<std::pair<std::string, std::size_t>, int> found;
  for (const auto& r : log.records) {
    if (r.cell == cell) found[{r.task_id, r.run_index}] = r.reward;
  }
  std::vector<std::vector<int>> rows;
  std::string gaps;
  for (const auto& task : task_ids) {
    auto& row = rows.emplace_back();
    for (std::size_t run = 0; run < runs; ++run) {
      auto it = found.find({task, run});
      if (it == found.end()) {
        gaps += (gaps.empty() ? "" : ", ") + std::string("(") + task + ", " + std::to_string(run) + ")";
        continue;
      }
      row.push_back(it->second);
    }
  }
  if (!gaps.empty()) throw ValidationError("cell " + cell.key() + " is missing runs: " + gaps);
  return RewardMatrix::single_model(cell.key(), task_ids, rows);
}

RewardMatrix aggregate(const RunLog& log, const GridCell& cell) {
  for (const auto& g : log.grids) {
    const auto cells = g.cells();
    if (std::find(cells.begin(), cells.end(), cell) != cells.end()) return aggregate(log, cell, g.task_ids, g.runs);
  }
  throw ValidationError("no grid in the log declares cell " + cell.key());
}

}  // namespace planahead
