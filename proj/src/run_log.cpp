#include "planahead/run_log.hpp"

#include "planahead/digest.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace planahead {

using nlohmann::json;

namespace {

std::string file_safe(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-';
    out.push_back(ok ? c : '_');
  }
  return out;
}

template <class T>
void require_unique(const std::vector<T>& items, const std::string& axis) {
  if (items.empty()) throw ValidationError("grid axis '" + axis + "' is empty");
  std::set<T> seen(items.begin(), items.end());
  if (seen.size() != items.size()) throw ValidationError("grid axis '" + axis + "' has duplicates");
}

json cell_json(const GridCell& c) {
  return {{"planner", c.planner_id},
          {"executor", c.executor_id},
          {"representation", to_string(c.representation)},
          {"mode", to_string(c.mode)}};
}

GridCell cell_from(const json& j) {
  return GridCell{j.at("planner").get<std::string>(), j.at("executor").get<std::string>(),
                  parse_representation(j.at("representation").get<std::string>()),
                  parse_mode(j.at("mode").get<std::string>())};
}

json record_json(const RunLogRecord& r, bool with_wall_time) {
  json j = {{"cell", cell_json(r.cell)},
            {"task_id", r.task_id},
            {"run_index", r.run_index},
            {"reward", r.reward},
            {"termination", to_string(r.termination)},
            {"steps", r.steps},
            {"planner_calls", r.planner_calls},
            {"executor_calls", r.executor_calls},
            {"trace", r.trace_digest},
            {"seed", r.seed},
            {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}}};
  if (with_wall_time) j["wall_time_s"] = r.wall_time_s;
  return j;
}

}  // namespace

std::string GridCell::key() const {
  return std::string(to_string(mode)) + "__" + std::string(to_string(representation)) + "__" + file_safe(planner_id) +
         "__" + file_safe(executor_id);
}

void ExperimentGrid::validate() const {
  require_unique(planner_ids, "planners");
  require_unique(executor_ids, "executors");
  require_unique(representations, "representations");
  require_unique(task_ids, "tasks");
  if (runs < 1) throw ValidationError("grid needs at least one run per task");
  if (worker_count < 1) throw ValidationError("grid needs at least one worker");
  if (mode == ExecutionMode::Dynamic) {
    if (planner_ids != executor_ids) {
      throw ValidationError("dynamic mode is single-agent: planner and executor lists must be identical");
    }
    if (representations != std::vector{PlanRepresentation::SequentialSubgoals}) {
      throw ValidationError("dynamic mode only supports the sequential representation");
    }
  }
  std::set<std::string> keys;
  for (const auto& c : cells()) {
    if (!keys.insert(c.key()).second) throw ValidationError("two grid cells map to the file name " + c.key());
  }
}

std::vector<GridCell> ExperimentGrid::cells() const {
  std::vector<GridCell> out;
  if (mode == ExecutionMode::Dynamic) {
    for (const auto& m : planner_ids) out.push_back({m, m, PlanRepresentation::SequentialSubgoals, mode});
    return out;
  }
  for (const auto& p : planner_ids) {
    for (const auto& e : executor_ids) {
      for (auto rep : representations) out.push_back({p, e, rep, mode});
    }
  }
  return out;
}

bool ExperimentGrid::same_experiment(const ExperimentGrid& o) const {
  return planner_ids == o.planner_ids && executor_ids == o.executor_ids && representations == o.representations &&
         task_ids == o.task_ids && runs == o.runs && mode == o.mode && seed == o.seed;
}

std::string RunLogRecord::content_digest() const { return sha256_hex(record_json(*this, false).dump()); }

std::string record_to_json_line(const RunLogRecord& r) { return record_json(r, true).dump(); }

RunLogRecord record_from_json_line(std::string_view line) {
  try {
    const auto j = json::parse(line);
    RunLogRecord r;
    r.cell = cell_from(j.at("cell"));
    r.task_id = j.at("task_id").get<std::string>();
    r.run_index = j.at("run_index").get<std::size_t>();
    r.reward = j.at("reward").get<int>();
    if (r.reward != 0 && r.reward != 1) throw ValidationError("record reward must be 0 or 1");
    r.termination = parse_termination(j.at("termination").get<std::string>());
    r.steps = j.at("steps").get<std::size_t>();
    r.planner_calls = j.at("planner_calls").get<std::size_t>();
    r.executor_calls = j.at("executor_calls").get<std::size_t>();
    r.trace_digest = j.at("trace").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.usage = TokenUsage{j.at("usage").at("input_tokens").get<std::uint64_t>(),
                         j.at("usage").at("output_tokens").get<std::uint64_t>()};
    r.wall_time_s = j.value("wall_time_s", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run record: ") + e.what());
  }
}

std::string grid_to_json(const ExperimentGrid& g) {
  json reps = json::array();
  for (auto r : g.representations) reps.push_back(to_string(r));
  json j = {{"planners", g.planner_ids}, {"executors", g.executor_ids}, {"representations", reps},
            {"tasks", g.task_ids},       {"runs", g.runs},                {"mode", to_string(g.mode)},
            {"seed", g.seed},            {"workers", g.worker_count}};
  return j.dump(2);
}

ExperimentGrid grid_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    ExperimentGrid g;
    g.planner_ids = j.at("planners").get<std::vector<std::string>>();
    g.executor_ids = j.at("executors").get<std::vector<std::string>>();
    for (const auto& r : j.at("representations")) g.representations.push_back(parse_representation(r.get<std::string>()));
    g.task_ids = j.at("tasks").get<std::vector<std::string>>();
    g.runs = j.at("runs").get<std::size_t>();
    g.mode = parse_mode(j.at("mode").get<std::string>());
    g.seed = j.at("seed").get<std::uint64_t>();
    g.worker_count = j.value("workers", std::size_t{1});
    return g;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed grid manifest: ") + e.what());
  }
}

namespace layout {
std::filesystem::path manifest(const std::filesystem::path& dir) { return dir / "manifest.json"; }
std::filesystem::path cell_file(const std::filesystem::path& dir, const GridCell& cell) {
  return dir / "cells" / (cell.key() + ".jsonl");
}
std::filesystem::path trace_file(const std::filesystem::path& dir, std::string_view digest) {
  return dir / "traces" / (std::string(digest) + ".jsonl");
}
std::filesystem::path request_log(const std::filesystem::path& dir) { return dir / "requests.jsonl"; }
}  // namespace layout

CellFileContents read_cell_file(const std::filesystem::path& path) {
  CellFileContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::size_t at = 0;
  while (at < text.size()) {
    const auto nl = text.find('\n', at);
    if (nl == std::string::npos) {
      out.truncated_tail = true;
      break;
    }
    const auto line = std::string_view(text).substr(at, nl - at);
    if (!line.empty()) out.records.push_back(record_from_json_line(line));
    at = nl + 1;
  }
  return out;
}

RunLog RunLog::load(const std::filesystem::path& dir) {
  std::ifstream manifest(layout::manifest(dir));
  if (!manifest) throw ValidationError("no manifest.json in " + dir.string());
  std::stringstream text;
  text << manifest.rdbuf();
  RunLog log;
  log.grids.push_back(grid_from_json(text.str()));
  for (const auto& cell : log.grids.front().cells()) {
    auto contents = read_cell_file(layout::cell_file(dir, cell));
    for (auto& r : contents.records) {
      if (r.cell != cell) throw ValidationError("record in " + cell.key() + ".jsonl belongs to " + r.cell.key());
      log.records.push_back(std::move(r));
    }
  }
  std::set<std::tuple<std::string, std::string, std::size_t>> keys;
  for (const auto& r : log.records) {
    if (!keys.insert(r.unit_key()).second) {
      throw ValidationError("duplicate record for " + r.cell.key() + " task " + r.task_id + " run " +
                            std::to_string(r.run_index));
    }
  }
  return log;
}

void RunLog::merge(RunLog other) {
  for (auto& g : other.grids) grids.push_back(std::move(g));
  for (auto& r : other.records) records.push_back(std::move(r));
}

std::set<std::string> RunLog::content_digests() const {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.content_digest());
  return out;
}

}  // namespace planahead
