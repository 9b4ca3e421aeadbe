#pragma once

#include "planahead/env_protocol.hpp"
#include "planahead/task_registry.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace planahead {

// Trims and collapses whitespace runs to one space. Transition keys and
// loop detection both compare actions in this form.
std::string normalize_action(std::string_view action);

// A deterministic finite-state stand-in for a web task.
struct SimTaskScript {
  std::string task_id;
  std::string goal;
  std::optional<std::string> domain_tag;
  std::vector<std::string> states;
  std::string initial;
  std::set<std::string> accepting;
  // (state, normalized action) -> next state. Anything else is a self-loop.
  std::map<std::pair<std::string, std::string>, std::string> transitions;
  std::map<std::string, Observation> observation_of;
};

// Throws ValidationError unless the script is well formed: known states
// only, normalized keys, one observation per state, initial not accepting,
// and some accepting state reachable from the initial one.
void validate_script(const SimTaskScript& script);

// Shortest action sequence from `from` to an accepting state (BFS over the
// transition map, ties broken by action string). Empty if unreachable.
std::vector<std::string> shortest_solution(const SimTaskScript& script, const std::string& from);

// An immutable, validated set of scripts shared by every SimEnvironment.
class SimWorld {
 public:
  explicit SimWorld(std::vector<SimTaskScript> scripts,
                    std::vector<std::string> action_templates = default_action_templates());

  static std::vector<std::string> default_action_templates();

  const SimTaskScript* find(std::string_view task_id) const;
  // The script that declares `state` (state ids are unique across the world).
  const SimTaskScript* owner_of_state(std::string_view state) const;
  const std::vector<SimTaskScript>& scripts() const { return scripts_; }
  const std::vector<std::string>& action_templates() const { return action_templates_; }
  TaskRegistry registry() const;

 private:
  std::vector<SimTaskScript> scripts_;
  std::vector<std::string> action_templates_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, std::size_t, std::less<>> by_state_;
};

// In-process environment over a SimWorld. Enforces the same state machine as
// the wire protocol: step before reset is "no-episode", step after done is
// "episode-done", unknown task ids are "unknown-task".
class SimEnvironment final : public Environment {
 public:
  explicit SimEnvironment(std::shared_ptr<const SimWorld> world);

  Observation reset(const std::string& task_id) override;
  StepResult step(const std::string& action) override;
  std::vector<std::string> describe_actions() override;

  const std::string& current_state() const { return state_; }

 private:
  Observation observe() const;

  std::shared_ptr<const SimWorld> world_;
  const SimTaskScript* task_ = nullptr;
  std::string state_;
  std::size_t step_index_ = 0;
  bool done_ = false;
};

// Small generated PNG whose colour depends on `seed_text`. Planners must not
// depend on its content.
ImagePart placeholder_screenshot(std::string_view seed_text);

// Ten web-like tasks (shopping, admin, map, gitlab, forum) plus the
// "loopback.echo" conformance task.
std::vector<SimTaskScript> builtin_sim_tasks();
std::shared_ptr<const SimWorld> builtin_sim_world();

inline constexpr std::string_view kLoopbackTaskId = "loopback.echo";

}  // namespace planahead
