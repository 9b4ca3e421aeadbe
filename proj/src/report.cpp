#include "planahead/report.hpp"

#include "planahead/metrics.hpp"
#include "planahead/orchestrator.hpp"

#include <algorithm>
#include <map>

namespace planahead {

namespace {

// Larger is better. Undefined seconds rank below every defined value.
bool better(const ReportEntry& a, const ReportEntry& b, ReportLayout layout) {
  if (a.first != b.first) return a.first > b.first;
  if (layout == ReportLayout::ArStc) {
    if (!a.second || !b.second) return a.second.has_value() && !b.second.has_value();
    return *a.second > *b.second;
  }
  return a.second.value_or(0.0) < b.second.value_or(0.0);  // lower SE wins
}

std::string metric_names(ReportLayout layout, int which) {
  if (layout == ReportLayout::ArStc) return which == 0 ? "AR" : "STC";
  return which == 0 ? "SR" : "SE";
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(ReportLayout layout) { return layout == ReportLayout::ArStc ? "ar_stc" : "sr_se"; }

ReportLayout parse_layout(std::string_view name) {
  if (name == "ar_stc") return ReportLayout::ArStc;
  if (name == "sr_se") return ReportLayout::SrSe;
  throw ValidationError("unknown report layout '" + std::string(name) + "' (expected ar_stc or sr_se)");
}

ReportTable build_report(const RunLog& log, ReportLayout layout) {
  ReportTable table;
  table.layout = layout;

  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::tuple<std::string, std::string, int, int>, ReportEntry> entries;
  bool dynamic = false;
  std::set<PlanRepresentation> static_reps;

  for (const auto& grid : log.grids) {
    for (const auto& cell : grid.cells()) {
      const std::pair pair{cell.planner_id, cell.executor_id};
      if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end()) pairs.push_back(pair);
      const auto matrix = aggregate(log, cell, grid.task_ids, grid.runs);
      ReportEntry entry;
      if (layout == ReportLayout::ArStc) {
        entry.first = *achievement_rate(matrix).value;
        entry.second = solved_task_consistency(matrix).value;
      } else {
        const auto sr = success_rate(matrix);
        entry.first = *sr.sr.value;
        entry.second = sr.se.value;
      }
      if (cell.mode == ExecutionMode::Dynamic) {
        dynamic = true;
      } else {
        static_reps.insert(cell.representation);
      }
      entries[{cell.planner_id, cell.executor_id, static_cast<int>(cell.mode), static_cast<int>(cell.representation)}] =
          entry;
    }
  }

  if (dynamic) {
    table.columns.push_back({ExecutionMode::Dynamic, PlanRepresentation::SequentialSubgoals, "Dynamic Sequential"});
  }
  for (auto rep : kAllRepresentations) {
    if (static_reps.count(rep)) table.columns.push_back({ExecutionMode::Static, rep, std::string(display_name(rep))});
  }

  for (const auto& [planner, executor] : pairs) {
    ReportRow row{planner, executor, {}};
    for (const auto& col : table.columns) {
      auto it = entries.find({planner, executor, static_cast<int>(col.mode), static_cast<int>(col.representation)});
      row.entries.push_back(it == entries.end() ? std::nullopt : std::optional(it->second));
    }
    const ReportEntry* best = nullptr;
    for (std::size_t i = 0; i < row.entries.size(); ++i) {
      if (table.columns[i].mode != ExecutionMode::Static || !row.entries[i]) continue;
      if (best == nullptr || better(*row.entries[i], *best, layout)) best = &*row.entries[i];
    }
    if (best != nullptr) {
      const ReportEntry top = *best;
      for (std::size_t i = 0; i < row.entries.size(); ++i) {
        auto& e = row.entries[i];
        if (table.columns[i].mode == ExecutionMode::Static && e && !better(top, *e, layout)) e->bold = true;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string render_markdown(const ReportTable& table) {
  const auto a = metric_names(table.layout, 0), b = metric_names(table.layout, 1);
  std::string out = "| Planner | Executor |";
  std::string rule = "|---|---|";
  for (const auto& c : table.columns) {
    out += " " + c.title + " " + a + " | " + c.title + " " + b + " |";
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  for (const auto& row : table.rows) {
    out += "| " + row.planner_id + " | " + row.executor_id + " |";
    for (const auto& e : row.entries) {
      if (!e) {
        out += "  |  |";
        continue;
      }
      auto cell = [&](const std::optional<double>& v) {
        const auto text = format_percent(v);
        return e->bold ? "**" + text + "**" : text;
      };
      out += " " + cell(e->first) + " | " + cell(e->second) + " |";
    }
    out += "\n";
  }
  return out;
}

std::string render_csv(const ReportTable& table) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  std::string out = "planner,executor,mode,representation," + lower(metric_names(table.layout, 0)) + "," +
                    lower(metric_names(table.layout, 1)) + ",best\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.entries.size(); ++i) {
      const auto& e = row.entries[i];
      if (!e) continue;
      const auto& col = table.columns[i];
      const auto second = e->second ? format_percent(e->second) : std::string();
      out += csv_field(row.planner_id) + "," + csv_field(row.executor_id) + "," + std::string(to_string(col.mode)) +
             "," + std::string(to_string(col.representation)) + "," + format_percent(e->first) + "," + second + "," +
             (e->bold ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace planahead
