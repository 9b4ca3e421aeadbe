#include "oracles.hpp"
#include "planahead/metrics.hpp"
#include "planahead/orchestrator.hpp"
#include "planahead/report.hpp"

#include <doctest.h>

#include <random>

using namespace planahead;

namespace {

// Builds a log by hand: rewards[rep][task] lists the run rewards.
struct LogBuilder {
  RunLog log;

  void add_grid(const std::string& planner, const std::string& executor, ExecutionMode mode,
                const std::map<PlanRepresentation, oracle::Rows>& rewards) {
    ExperimentGrid g;
    g.planner_ids = {planner};
    g.executor_ids = {executor};
    g.mode = mode;
    const auto& any = rewards.begin()->second;
    g.task_ids = oracle::task_names(any.size());
    g.runs = any[0].size();
    for (const auto& [rep, rows] : rewards) {
      g.representations.push_back(rep);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t i = 0; i < rows[t].size(); ++i) {
          RunLogRecord r;
          r.cell = {planner, executor, rep, mode};
          r.task_id = g.task_ids[t];
          r.run_index = i;
          r.reward = rows[t][i];
          r.termination = rows[t][i] ? Termination::Success : Termination::Budget;
          log.records.push_back(r);
        }
      }
    }
    log.grids.push_back(g);
  }
};

const ReportEntry& entry(const ReportTable& t, std::size_t row, const std::string& title) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c].title == title) return *t.rows.at(row).entries.at(c);
  }
  throw std::runtime_error("no column " + title);
}

const oracle::Rows kWeak = {{0, 0, 0}, {1, 0, 0}, {0, 0, 0}};
const oracle::Rows kStrong = {{1, 1, 0}, {1, 0, 0}, {1, 1, 1}};
const oracle::Rows kZero = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

}  // namespace

TEST_CASE("the dominant representation is bold") {
  LogBuilder b;
  b.add_grid("p", "e", ExecutionMode::Static,
             {{PlanRepresentation::SequentialSubgoals, kWeak},
              {PlanRepresentation::Checklist, kWeak},
              {PlanRepresentation::Pseudocode, kZero},
              {PlanRepresentation::Narrative, kStrong}});
  const auto table = build_report(b.log, ReportLayout::ArStc);
  REQUIRE(table.rows.size() == 1);
  REQUIRE(table.columns.size() == 4);
  CHECK(entry(table, 0, "Narrative").bold);
  CHECK_FALSE(entry(table, 0, "Sequential").bold);
  CHECK_FALSE(entry(table, 0, "Pseudocode").bold);
  const auto md = render_markdown(table);
  CHECK(md.find("| **100.0** | **66.7** |") != std::string::npos);
}

TEST_CASE("an all-zero row prints 0.0 and a dash") {
  LogBuilder b;
  b.add_grid("p", "e", ExecutionMode::Static, {{PlanRepresentation::Checklist, kZero}});
  const auto md = render_markdown(build_report(b.log, ReportLayout::ArStc));
  CHECK(md.find("**0.0** | **—**") != std::string::npos);
  const auto csv = render_csv(build_report(b.log, ReportLayout::ArStc));
  CHECK(csv == "planner,executor,mode,representation,ar,stc,best\np,e,static,checklist,0.0,,1\n");
}

TEST_CASE("AR ties are broken by STC and remaining ties are all bold") {
  const oracle::Rows a = {{1, 0}, {0, 0}};  // AR 50, STC 50
  const oracle::Rows c = {{1, 1}, {0, 0}};  // AR 50, STC 100
  LogBuilder b;
  b.add_grid("p", "e", ExecutionMode::Static,
             {{PlanRepresentation::SequentialSubgoals, a}, {PlanRepresentation::Checklist, c},
              {PlanRepresentation::Narrative, c}});
  const auto table = build_report(b.log, ReportLayout::ArStc);
  CHECK_FALSE(entry(table, 0, "Sequential").bold);
  CHECK(entry(table, 0, "Checklist").bold);
  CHECK(entry(table, 0, "Narrative").bold);
}

TEST_CASE("the dynamic baseline comes first and is never bold") {
  LogBuilder b;
  b.add_grid("m", "m", ExecutionMode::Dynamic, {{PlanRepresentation::SequentialSubgoals, kStrong}});
  b.add_grid("m", "m", ExecutionMode::Static,
             {{PlanRepresentation::Checklist, kWeak}, {PlanRepresentation::Narrative, kZero}});
  const auto table = build_report(b.log, ReportLayout::ArStc);
  REQUIRE(table.columns.size() == 3);
  CHECK(table.columns[0].title == "Dynamic Sequential");
  CHECK(table.columns[0].mode == ExecutionMode::Dynamic);
  CHECK_FALSE(entry(table, 0, "Dynamic Sequential").bold);
  CHECK(entry(table, 0, "Checklist").bold);
  const auto md = render_markdown(table);
  CHECK(md.rfind("| Planner | Executor | Dynamic Sequential AR | Dynamic Sequential STC | Checklist AR |", 0) == 0);
}

TEST_CASE("missing pairs render as empty cells") {
  LogBuilder b;
  b.add_grid("p1", "e", ExecutionMode::Static, {{PlanRepresentation::Checklist, kWeak}});
  b.add_grid("p2", "e", ExecutionMode::Static, {{PlanRepresentation::Narrative, kWeak}});
  const auto table = build_report(b.log, ReportLayout::ArStc);
  REQUIRE(table.rows.size() == 2);
  CHECK_FALSE(table.rows[0].entries[1].has_value());
  const auto md = render_markdown(table);
  CHECK(md.find("| p1 | e | **33.3** | **33.3** |  |  |") != std::string::npos);
}

TEST_CASE("rendered values equal the metrics module to one decimal") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<PlanRepresentation, oracle::Rows> rewards;
    for (auto rep : kAllRepresentations) rewards[rep] = oracle::random_rows(rng, 6, 4, 0.3);
    LogBuilder b;
    b.add_grid("p", "e", ExecutionMode::Static, rewards);
    for (auto layout : {ReportLayout::ArStc, ReportLayout::SrSe}) {
      const auto table = build_report(b.log, layout);
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& rows = rewards.at(table.columns[c].representation);
        const auto m = RewardMatrix::single_model("m", oracle::task_names(rows.size()), rows);
        const auto& e = *table.rows[0].entries[c];
        if (layout == ReportLayout::ArStc) {
          CHECK(format_percent(e.first) == format_percent(achievement_rate(m)));
          CHECK(format_percent(e.second) == format_percent(solved_task_consistency(m)));
          CHECK(format_percent(e.first) == oracle::one_decimal(oracle::ar(rows)));
        } else {
          CHECK(format_percent(e.first) == oracle::one_decimal(oracle::sr(rows)));
          CHECK(format_percent(e.second) == oracle::one_decimal(oracle::se(rows)));
        }
      }
    }
  }
}

TEST_CASE("sr_se layout prefers higher SR then lower SE") {
  const oracle::Rows low_var = {{1, 1}, {0, 0}};  // SR 50
  const oracle::Rows high = {{1, 1}, {1, 0}};     // SR 75
  LogBuilder b;
  b.add_grid("p", "e", ExecutionMode::Static,
             {{PlanRepresentation::Checklist, low_var}, {PlanRepresentation::Pseudocode, high}});
  const auto table = build_report(b.log, ReportLayout::SrSe);
  CHECK(entry(table, 0, "Pseudocode").bold);
  CHECK_FALSE(entry(table, 0, "Checklist").bold);
  CHECK(render_markdown(table).find("Checklist SR | Checklist SE") != std::string::npos);
}

TEST_CASE("layout names") {
  CHECK(parse_layout("ar_stc") == ReportLayout::ArStc);
  CHECK(parse_layout(to_string(ReportLayout::SrSe)) == ReportLayout::SrSe);
  CHECK_THROWS_AS(parse_layout("fancy"), ValidationError);
}

TEST_CASE("incomplete cells cannot be reported") {
  LogBuilder b;
  b.add_grid("p", "e", ExecutionMode::Static, {{PlanRepresentation::Checklist, kWeak}});
  b.log.records.pop_back();
  CHECK_THROWS_AS(build_report(b.log, ReportLayout::ArStc), ValidationError);
}

TEST_CASE("csv quotes awkward model names") {
  LogBuilder b;
  b.add_grid("a,b", "e\"x", ExecutionMode::Static, {{PlanRepresentation::Checklist, kStrong}});
  const auto csv = render_csv(build_report(b.log, ReportLayout::ArStc));
  CHECK(csv.find("\"a,b\",\"e\"\"x\",static,checklist,100.0,66.7,1") != std::string::npos);
}
