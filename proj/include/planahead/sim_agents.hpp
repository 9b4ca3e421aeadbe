#pragma once

#include "planahead/mock_model.hpp"
#include "planahead/plan_engine.hpp"
#include "planahead/sim_env.hpp"

#include <array>
#include <memory>
#include <string>
#include <string_view>

namespace planahead {

// Scripted stand-ins for planner and executor models on the sim world. One
// mock model answers all three request kinds ("plan-*", "replan-*", "act-*").
//
// Whether an episode is solved is a pure function of the request seed, the
// task and the plan's shape, so grids are reproducible yet vary per run.
struct SimAgentProfile {
  std::string name;
  // Probability of a competent episode, indexed like kAllRepresentations.
  std::array<double, 4> static_skill{};
  double dynamic_skill = 0.0;
};

// "strong" and "weak" are built in.
SimAgentProfile sim_agent_profile(std::string_view name);

enum class PlanShape { Sequential, Checklist, Pseudocode, Narrative, Revised };

// Recognizes the layouts the scripted planner writes.
PlanShape classify_plan_shape(std::string_view plan_text);

// Per-task multiplier on skill in [0, 1]; some tasks are never solved.
double task_affinity(std::string_view task_id);

// Plan text in the given representation for a list of concrete actions.
std::string render_sim_plan(PlanRepresentation rep, const std::vector<std::string>& actions);

MockScript sim_agent_script(std::shared_ptr<const SimWorld> world, const SimAgentProfile& profile,
                            std::string model_id);

}  // namespace planahead
