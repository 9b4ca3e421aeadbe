#pragma once

#include "planahead/run_log.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace planahead {

enum class ReportLayout { ArStc, SrSe };

std::string_view to_string(ReportLayout layout);
ReportLayout parse_layout(std::string_view name);

struct ReportColumn {
  ExecutionMode mode = ExecutionMode::Static;
  PlanRepresentation representation = PlanRepresentation::SequentialSubgoals;
  std::string title;  // "Dynamic Sequential", "Checklist", ...
};

// AR and STC, or SR and SE, at full precision.
struct ReportEntry {
  double first = 0.0;
  std::optional<double> second;  // STC is undefined when nothing was solved
  bool bold = false;
};

struct ReportRow {
  std::string planner_id;
  std::string executor_id;
  std::vector<std::optional<ReportEntry>> entries;  // one per column
};

struct ReportTable {
  ReportLayout layout = ReportLayout::ArStc;
  std::vector<ReportColumn> columns;
  std::vector<ReportRow> rows;
};

// One row per (planner, executor) pair in the order the grids list them;
// columns are the dynamic sequential baseline (when present) followed by the
// static representations present in the log. In each row the best static
// entry is bold: AR then STC (undefined lowest) for ar_stc, SR then lower SE
// for sr_se. Ties are all bold. Every cell must be complete.
ReportTable build_report(const RunLog& log, ReportLayout layout);

// Values at one decimal via format_percent.
std::string render_markdown(const ReportTable& table);
// Long format: planner,executor,mode,representation,<metric>,<metric>,best.
std::string render_csv(const ReportTable& table);

}  // namespace planahead
