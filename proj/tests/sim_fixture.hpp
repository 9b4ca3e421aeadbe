#pragma once

#include "planahead/orchestrator.hpp"
#include "planahead/sim_agents.hpp"
#include "planahead/sim_env.hpp"

#include <memory>
#include <string>
#include <vector>

// A sim world with the two built-in scripted agents registered as
// "sim-strong" and "sim-weak".
struct SimLab {
  std::shared_ptr<const planahead::SimWorld> world = planahead::builtin_sim_world();
  planahead::TaskRegistry registry = world->registry();
  planahead::ModelGateway gateway;
  planahead::EnvironmentFactory environments;
  planahead::EpisodeSettings settings;

  SimLab() {
    gateway.register_mock(planahead::sim_agent_script(world, planahead::sim_agent_profile("strong"), "sim-strong"));
    gateway.register_mock(planahead::sim_agent_script(world, planahead::sim_agent_profile("weak"), "sim-weak"));
    auto w = world;
    environments = [w] { return std::make_unique<planahead::SimEnvironment>(w); };
  }

  std::vector<std::string> sim_task_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : world->scripts()) {
      if (s.task_id != planahead::kLoopbackTaskId) ids.push_back(s.task_id);
    }
    return ids;
  }

  planahead::RunSummary run(const planahead::ExperimentGrid& grid, planahead::RunOptions options) {
    return planahead::run_grid(grid, registry, gateway, environments, settings, options);
  }
};

inline planahead::ExperimentGrid static_grid(std::vector<std::string> planners, std::vector<std::string> executors,
                                             std::vector<planahead::PlanRepresentation> reps,
                                             std::vector<std::string> tasks, std::size_t runs,
                                             std::size_t workers = 1) {
  planahead::ExperimentGrid g;
  g.planner_ids = std::move(planners);
  g.executor_ids = std::move(executors);
  g.representations = std::move(reps);
  g.task_ids = std::move(tasks);
  g.runs = runs;
  g.seed = 7;
  g.worker_count = workers;
  return g;
}

inline planahead::ExperimentGrid dynamic_grid(std::vector<std::string> models, std::vector<std::string> tasks,
                                              std::size_t runs, std::size_t workers = 1) {
  auto g = static_grid(models, models, {planahead::PlanRepresentation::SequentialSubgoals}, std::move(tasks), runs,
                       workers);
  g.mode = planahead::ExecutionMode::Dynamic;
  return g;
}
