// planahead: command-line front end of the experiment harness.

#include "planahead/config.hpp"
#include "planahead/conformance.hpp"
#include "planahead/line_channel.hpp"
#include "planahead/metrics.hpp"
#include "planahead/report.hpp"
#include "planahead/sim_agents.hpp"
#include "planahead/sim_env.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace planahead;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

RewardMatrix matrix_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  return read_reward_csv(in);
}

// Every cell of every grid in the logs becomes one "model" of the matrix.
RewardMatrix matrix_from_logs(const std::vector<std::string>& dirs) {
  RunLog log;
  for (const auto& d : dirs) log.merge(RunLog::load(d));
  std::vector<RewardObservation> observations;
  for (const auto& grid : log.grids) {
    for (const auto& cell : grid.cells()) {
      const auto m = aggregate(log, cell, grid.task_ids, grid.runs);
      for (std::size_t t = 0; t < m.task_count(); ++t) {
        for (std::size_t i = 0; i < m.runs(); ++i) {
          observations.push_back({m.task_ids()[t], cell.key(), static_cast<std::int64_t>(i), m.reward(t, 0, i) ? 1 : 0});
        }
      }
    }
  }
  return RewardMatrix::from_observations(observations);
}

int cmd_grade(const std::string& matrix_path, const std::vector<std::string>& logs) {
  const auto matrix = logs.empty() ? matrix_from_csv(matrix_path) : matrix_from_logs(logs);
  const auto grading = grade_difficulty(matrix);
  std::cout << "task_id,label\n";
  for (const auto& g : grading) std::cout << g.task_id << "," << to_string(g.label) << "\n";
  const auto counts = count_labels(grading);
  std::cout << "\nEasy " << counts.easy << ", Medium " << counts.medium << ", Hard " << counts.hard << " (of "
            << grading.size() << " tasks, " << matrix.model_count() << " models x " << matrix.runs() << " runs)\n";
  std::cout << "\nruns,hard,hard_final,overlap_pct,final_coverage_pct\n";
  for (const auto& row : hard_set_sensitivity_table(matrix)) {
    std::cout << row.runs << "," << row.hard_count << "," << row.final_hard_count << ","
              << format_percent(row.overlap_pct) << "," << format_percent(row.final_coverage_pct) << "\n";
  }
  return 0;
}

int cmd_metrics(const std::string& matrix_path, const std::string& model, const BootstrapOptions& options) {
  const auto all = matrix_from_csv(matrix_path);
  std::vector<std::string> models = model.empty() ? all.model_ids() : std::vector{model};
  std::cout << "model,tasks,runs,SR,SE,AR,STC,AR_lo,AR_hi,STC_lo,STC_hi\n";
  for (const auto& id : models) {
    const auto m = all.for_model(id);
    const auto sr = success_rate(m);
    const auto ar = achievement_rate(m);
    const auto stc = solved_task_consistency(m);
    const auto ar_ci = bootstrap_ci(m, MetricName::AR, options);
    std::string stc_lo = format_percent(std::nullopt), stc_hi = stc_lo;
    if (stc.defined()) {
      const auto ci = bootstrap_ci(m, MetricName::STC, options);
      stc_lo = format_percent(ci.lower);
      stc_hi = format_percent(ci.upper);
    }
    std::cout << id << "," << m.task_count() << "," << m.runs() << "," << format_percent(sr.sr) << ","
              << format_percent(sr.se) << "," << format_percent(ar) << "," << format_percent(stc) << ","
              << format_percent(ar_ci.lower) << "," << format_percent(ar_ci.upper) << "," << stc_lo << "," << stc_hi
              << "\n";
  }
  return 0;
}

int cmd_plan(const std::string& config_path, const std::string& model, const std::string& goal,
             const std::string& representation, const std::string& screenshot_path, std::optional<std::uint64_t> seed,
             double temperature) {
  std::shared_ptr<ModelGateway> gateway;
  if (config_path.empty()) {
    gateway = std::make_shared<ModelGateway>();
    for (const auto* profile : {"strong", "weak"}) {
      gateway->register_mock(
          sim_agent_script(builtin_sim_world(), sim_agent_profile(profile), std::string("sim-") + profile));
    }
  } else {
    gateway = build_harness(load_config(config_path)).gateway;
  }
  PlannerRequest request;
  request.representation = parse_representation(representation);
  request.goal = goal;
  request.temperature = temperature;
  request.seed = seed;
  if (screenshot_path.empty()) {
    request.screenshot = placeholder_screenshot(goal);
  } else {
    std::ifstream in(screenshot_path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + screenshot_path);
    request.screenshot.bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto plan = generate_plan(*gateway, model, request);
  std::cout << "<observation>\n" << plan.observation_text << "\n</observation>\n<plan>\n" << plan.plan_text
            << "\n</plan>\n<thought>\n" << plan.thought_text << "\n</thought>\n";
  if (plan.retries) std::cerr << "planner needed " << plan.retries << " re-asks\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out, std::optional<std::size_t> workers) {
  auto config = load_config(config_path);
  if (workers) config.grid.worker_count = *workers;
  auto harness = build_harness(config);
  RunOptions options;
  options.out_dir = out;
  options.secrets = harness.secrets;
  const auto summary =
      run_grid(config.grid, harness.registry, *harness.gateway, harness.environments, config.episode, options);
  std::cout << "units " << summary.planned << ", already recorded " << summary.skipped << ", recorded now "
            << summary.executed << ", failed " << summary.failures.size() << "\n";
  for (const auto& f : summary.failures) {
    std::cerr << "failed: " << f.unit.cell.key() << " " << f.unit.task_id << " run " << f.unit.run_index << ": "
              << f.error << "\n";
  }
  return summary.failures.empty() ? 0 : kExitRuntime;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& layout, const std::string& format) {
  RunLog log;
  for (const auto& d : dirs) log.merge(RunLog::load(d));
  const auto table = build_report(log, parse_layout(layout));
  if (format == "md") {
    std::cout << render_markdown(table);
  } else if (format == "csv") {
    std::cout << render_csv(table);
  } else {
    throw ValidationError("unknown format '" + format + "' (expected md or csv)");
  }
  return 0;
}

int cmd_serve_sim(const std::string& host, std::uint16_t port, bool once) {
  TcpListener listener(host, port);
  std::cout << "listening on " << host << ":" << listener.port() << std::endl;
  const auto world = builtin_sim_world();
  auto serve = [world](std::shared_ptr<FdLineChannel> channel) {
    SimEnvironment env(world);
    ProtocolServer server(env);
    try {
      server.serve(*channel);
    } catch (const Error& e) {
      std::cerr << "connection ended: " << e.what() << "\n";
    }
  };
  if (once) {
    serve(listener.accept());
    return 0;
  }
  for (;;) std::thread(serve, std::shared_ptr<FdLineChannel>(listener.accept())).detach();
}

int cmd_conformance(const std::string& host, std::uint16_t port, const ConformanceCase& c) {
  RemoteEnvironment env(connect_tcp(host, port));
  const auto report = run_wire_conformance(env, c);
  std::cout << report.summary();
  std::cout << "\ntranscript:\n";
  for (const auto& line : report.transcript) std::cout << "  " << line << "\n";
  std::cout << (report.passed() ? "conformance: PASS\n" : "conformance: FAIL\n");
  return report.passed() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PlanAhead experiment harness"};
  app.require_subcommand(1);

  auto* grade = app.add_subcommand("grade", "Difficulty labels and hard-set sensitivity of a reward matrix");
  std::string grade_matrix;
  std::vector<std::string> grade_logs;
  auto* grade_matrix_opt = grade->add_option("--matrix", grade_matrix, "Reward CSV (task_id,model_id,run_index,reward)");
  auto* grade_logs_opt = grade->add_option("--logs", grade_logs, "Run directories; every grid cell counts as a model");
  grade_matrix_opt->excludes(grade_logs_opt);

  auto* metrics = app.add_subcommand("metrics", "SR, SE, AR, STC and bootstrap intervals of a reward matrix");
  std::string metrics_matrix, metrics_model;
  BootstrapOptions boot;
  metrics->add_option("--matrix", metrics_matrix, "Reward CSV")->required();
  metrics->add_option("--model", metrics_model, "Only this model id");
  metrics->add_option("--resamples", boot.resamples, "Bootstrap resamples")->capture_default_str();
  metrics->add_option("--level", boot.level, "Confidence level")->capture_default_str();
  metrics->add_option("--seed", boot.seed, "Bootstrap seed")->capture_default_str();
  metrics->add_option("--workers", boot.workers, "Bootstrap threads")->capture_default_str();

  auto* plan = app.add_subcommand("plan", "Generate one plan");
  std::string plan_config, plan_model = "sim-strong", plan_goal, plan_rep = "sequential", plan_shot;
  std::optional<std::uint64_t> plan_seed;
  double plan_temperature = 0.6;
  plan->add_option("--config", plan_config, "Config whose models to use (default: built-in sim agents)");
  plan->add_option("--model", plan_model, "Planner model id")->capture_default_str();
  plan->add_option("--goal", plan_goal, "Task goal")->required();
  plan->add_option("--representation", plan_rep, "sequential, checklist, pseudocode or narrative")
      ->capture_default_str();
  plan->add_option("--screenshot", plan_shot, "PNG of the start page (default: placeholder)");
  plan->add_option("--seed", plan_seed, "Sampling seed");
  plan->add_option("--temperature", plan_temperature, "Planner temperature")->capture_default_str();

  auto* run = app.add_subcommand("run", "Execute (or resume) an experiment grid");
  std::string run_config, run_out;
  std::optional<std::size_t> run_workers;
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Run directory")->required();
  run->add_option("--workers", run_workers, "Override grid.workers");

  auto* report = app.add_subcommand("report", "AR/STC or SR/SE table from run directories");
  std::vector<std::string> report_logs;
  std::string report_layout = "ar_stc", report_format = "md";
  report->add_option("--logs", report_logs, "Run directories")->required();
  report->add_option("--layout", report_layout, "ar_stc or sr_se")->capture_default_str();
  report->add_option("--format", report_format, "md or csv")->capture_default_str();

  auto* serve = app.add_subcommand("serve-sim", "Serve the simulated tasks over the wire protocol");
  std::string serve_host = "127.0.0.1";
  std::uint16_t serve_port = 0;
  bool serve_once = false;
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port, "0 picks a free port")->capture_default_str();
  serve->add_flag("--once", serve_once, "Exit after accepting one connection");

  auto* conformance = app.add_subcommand("conformance", "Run the wire-protocol conformance suite against a server");
  std::string conf_host = "127.0.0.1";
  std::uint16_t conf_port = 0;
  ConformanceCase conf_case;
  conformance->add_option("--host", conf_host)->capture_default_str();
  conformance->add_option("--port", conf_port)->required();
  conformance->add_option("--task", conf_case.task_id, "Task with a known solution")->capture_default_str();
  conformance->add_option("--solution", conf_case.solution, "Solution actions in order");
  conformance->add_option("--wrong-action", conf_case.wrong_action)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*grade) {
      if (grade_matrix.empty() && grade_logs.empty()) throw ValidationError("grade needs --matrix or --logs");
      return cmd_grade(grade_matrix, grade_logs);
    }
    if (*metrics) return cmd_metrics(metrics_matrix, metrics_model, boot);
    if (*plan) return cmd_plan(plan_config, plan_model, plan_goal, plan_rep, plan_shot, plan_seed, plan_temperature);
    if (*run) return cmd_run(run_config, run_out, run_workers);
    if (*report) return cmd_report(report_logs, report_layout, report_format);
    if (*serve) return cmd_serve_sim(serve_host, serve_port, serve_once);
    if (*conformance) return cmd_conformance(conf_host, conf_port, conf_case);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
