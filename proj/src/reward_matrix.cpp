#include "planahead/reward_matrix.hpp"

#include "planahead/error.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace planahead {

namespace {

void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + what + " id: " + id);
  }
}

// RFC 4180 style split of one record; quotes may wrap a field and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw ValidationError("csv: unterminated quote in line: " + line);
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::int64_t parse_int(const std::string& text, const char* what) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ValidationError(std::string("csv: bad ") + what + ": '" + text + "'");
  return value;
}

}  // namespace

RewardMatrix::RewardMatrix(std::vector<std::string> task_ids, std::vector<std::string> model_ids,
                           std::size_t runs, std::vector<std::uint8_t> rewards)
    : task_ids_(std::move(task_ids)), model_ids_(std::move(model_ids)), runs_(runs), rewards_(std::move(rewards)) {
  if (model_ids_.empty()) throw ValidationError("reward matrix needs at least one model");
  if (runs_ == 0) throw ValidationError("reward matrix needs at least one run");
  if (rewards_.size() != task_ids_.size() * model_ids_.size() * runs_) {
    throw ValidationError("reward tensor size does not match tasks x models x runs");
  }
  for (auto r : rewards_) {
    if (r > 1) throw ValidationError("reward values must be 0 or 1");
  }
  require_unique(task_ids_, "task");
  require_unique(model_ids_, "model");
}

RewardMatrix RewardMatrix::from_observations(std::span<const RewardObservation> observations) {
  std::vector<std::string> tasks;
  std::vector<std::string> models;
  std::unordered_map<std::string, std::size_t> task_pos;
  std::unordered_map<std::string, std::size_t> model_pos;
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::int64_t, int>> cells;

  for (const auto& obs : observations) {
    if (obs.reward != 0 && obs.reward != 1) {
      throw ValidationError("reward must be 0 or 1 (task " + obs.task_id + ", run " +
                            std::to_string(obs.run_index) + ")");
    }
    auto [t, t_new] = task_pos.try_emplace(obs.task_id, tasks.size());
    if (t_new) tasks.push_back(obs.task_id);
    auto [m, m_new] = model_pos.try_emplace(obs.model_id, models.size());
    if (m_new) models.push_back(obs.model_id);
    auto& runs = cells[{t->second, m->second}];
    if (!runs.emplace(obs.run_index, obs.reward).second) {
      throw ValidationError("duplicate reward for task " + obs.task_id + ", model " + obs.model_id + ", run " +
                            std::to_string(obs.run_index));
    }
  }
  if (models.empty()) throw ValidationError("no tasks");

  std::set<std::int64_t> run_set;
  for (const auto& [run, value] : cells.begin()->second) run_set.insert(run);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto it = cells.find({t, m});
      std::set<std::int64_t> these;
      if (it != cells.end()) {
        for (const auto& [key, value] : it->second) these.insert(key);
      }
      if (these != run_set) {
        throw ValidationError("ragged reward data: task " + tasks[t] + ", model " + models[m] + " has " +
                              std::to_string(these.size()) + " runs, expected " + std::to_string(run_set.size()) +
                              " with matching run indices");
      }
    }
  }

  const std::size_t n = run_set.size();
  std::vector<std::uint8_t> rewards;
  rewards.reserve(tasks.size() * models.size() * n);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      for (const auto& [run, value] : cells.at({t, m})) rewards.push_back(static_cast<std::uint8_t>(value));
    }
  }
  return RewardMatrix(std::move(tasks), std::move(models), n, std::move(rewards));
}

RewardMatrix RewardMatrix::single_model(std::string model_id, std::vector<std::string> task_ids,
                                        const std::vector<std::vector<int>>& rows) {
  if (rows.size() != task_ids.size()) throw ValidationError("one reward row per task required");
  const std::size_t n = rows.empty() ? 1 : rows.front().size();
  std::vector<std::uint8_t> rewards;
  for (const auto& row : rows) {
    if (row.size() != n) throw ValidationError("ragged reward rows");
    for (int r : row) {
      if (r != 0 && r != 1) throw ValidationError("reward values must be 0 or 1");
      rewards.push_back(static_cast<std::uint8_t>(r));
    }
  }
  return RewardMatrix(std::move(task_ids), {std::move(model_id)}, n, std::move(rewards));
}

RewardMatrix RewardMatrix::run_prefix(std::size_t n) const {
  if (n < 1 || n > runs_) {
    throw ValidationError("run prefix " + std::to_string(n) + " out of range [1, " + std::to_string(runs_) + "]");
  }
  std::vector<std::uint8_t> rewards;
  rewards.reserve(task_ids_.size() * model_ids_.size() * n);
  for (std::size_t t = 0; t < task_ids_.size(); ++t) {
    for (std::size_t m = 0; m < model_ids_.size(); ++m) {
      auto r = row(t, m);
      rewards.insert(rewards.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n));
    }
  }
  return RewardMatrix(task_ids_, model_ids_, n, std::move(rewards));
}

RewardMatrix RewardMatrix::for_model(std::size_t model) const {
  if (model >= model_ids_.size()) throw ValidationError("model index out of range");
  std::vector<std::uint8_t> rewards;
  rewards.reserve(task_ids_.size() * runs_);
  for (std::size_t t = 0; t < task_ids_.size(); ++t) {
    auto r = row(t, model);
    rewards.insert(rewards.end(), r.begin(), r.end());
  }
  return RewardMatrix(task_ids_, {model_ids_[model]}, runs_, std::move(rewards));
}

RewardMatrix RewardMatrix::for_model(const std::string& model_id) const {
  auto it = std::find(model_ids_.begin(), model_ids_.end(), model_id);
  if (it == model_ids_.end()) throw ValidationError("unknown model id: " + model_id);
  return for_model(static_cast<std::size_t>(it - model_ids_.begin()));
}

RewardMatrix read_reward_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: missing header");
  const auto header = split_csv_line(line);
  auto column = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("csv: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t task_col = column("task_id");
  const std::size_t model_col = column("model_id");
  const std::size_t run_col = column("run_index");
  const std::size_t reward_col = column("reward");
  const std::size_t needed = std::max({task_col, model_col, run_col, reward_col}) + 1;

  std::vector<RewardObservation> observations;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < needed) throw ValidationError("csv: too few fields on line " + std::to_string(line_no));
    RewardObservation obs;
    obs.task_id = fields[task_col];
    obs.model_id = fields[model_col];
    obs.run_index = parse_int(fields[run_col], "run_index");
    obs.reward = static_cast<int>(parse_int(fields[reward_col], "reward"));
    observations.push_back(std::move(obs));
  }
  if (observations.empty()) throw ValidationError("no tasks");
  return RewardMatrix::from_observations(observations);
}

void write_reward_csv(std::ostream& out, const RewardMatrix& matrix) {
  out << "task_id,model_id,run_index,reward\n";
  for (std::size_t t = 0; t < matrix.task_count(); ++t) {
    for (std::size_t m = 0; m < matrix.model_count(); ++m) {
      for (std::size_t i = 0; i < matrix.runs(); ++i) {
        out << csv_escape(matrix.task_ids()[t]) << ',' << csv_escape(matrix.model_ids()[m]) << ',' << i << ','
            << (matrix.reward(t, m, i) ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace planahead
