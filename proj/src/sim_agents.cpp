#include "planahead/sim_agents.hpp"

#include "planahead/digest.hpp"

namespace planahead {

namespace {

constexpr std::string_view kRevisedHeader = "Remaining steps:";

std::string base_tag(std::string_view tag) {
  const auto slash = tag.rfind('/');
  return std::string(slash == std::string_view::npos ? tag : tag.substr(slash + 1));
}

// Uniform draw in [0, 1) fixed by its inputs.
double draw(std::uint64_t seed, std::string_view task_id, std::string_view purpose) {
  const auto hex = sha256_hex(std::to_string(seed) + "|" + std::string(task_id) + "|" + std::string(purpose));
  return static_cast<double>(std::stoull(hex.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
}

std::vector<std::string> quoted_args(std::string_view action) {
  std::vector<std::string> args;
  std::size_t at = 0;
  while ((at = action.find('\'', at)) != std::string_view::npos) {
    const auto end = action.find('\'', at + 1);
    if (end == std::string_view::npos) break;
    args.emplace_back(action.substr(at + 1, end - at - 1));
    at = end + 1;
  }
  return args;
}

std::string describe(const std::string& action) {
  const auto name = action_name(action);
  const auto args = quoted_args(action);
  auto arg = [&](std::size_t i) { return i < args.size() ? args[i] : std::string("?"); };
  if (name == "click") return "click element " + arg(0);
  if (name == "fill") return "type '" + arg(1) + "' into element " + arg(0);
  if (name == "select_option") return "choose '" + arg(1) + "' in element " + arg(0);
  if (name == "goto") return "open " + arg(0);
  if (name == "stop") return "report the answer '" + arg(0) + "'";
  return "perform " + action;
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  return std::string(text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start));
}

std::string state_in(std::string_view prompt) { return between(prompt, "data-state=\"", "\""); }

PlanRepresentation representation_from_system(std::string_view system) {
  if (system.find("step-by-step numbered format") != std::string_view::npos) return PlanRepresentation::SequentialSubgoals;
  if (system.find("unordered checklist format") != std::string_view::npos) return PlanRepresentation::Checklist;
  if (system.find("pseudocode style") != std::string_view::npos) return PlanRepresentation::Pseudocode;
  if (system.find("paragraph in plain text") != std::string_view::npos) return PlanRepresentation::Narrative;
  throw MockMiss("scripted planner does not recognize the plan format requested");
}

std::string planner_reply(const std::string& plan_text) {
  return render_planner_output(PlanSections{"The browser shows the start page for the task.", plan_text,
                                            "Following these steps in order should complete the goal."});
}

class SimAgent {
 public:
  SimAgent(std::shared_ptr<const SimWorld> world, SimAgentProfile profile)
      : world_(std::move(world)), profile_(std::move(profile)) {}

  std::optional<MockOutcome> operator()(const ChatRequest& request, std::size_t) const {
    const auto tag = base_tag(request.request_tag);
    if (tag.rfind("plan-", 0) == 0) return plan(request);
    if (tag.rfind("replan-", 0) == 0) return replan(request);
    if (tag.rfind("act-", 0) == 0) return act(request);
    return std::nullopt;
  }

 private:
  MockOutcome plan(const ChatRequest& request) const {
    const auto rep = representation_from_system(last_text(request, Role::System));
    const auto goal = between(last_text(request), "The task goal is: ", "\n");
    for (const auto& script : world_->scripts()) {
      if (script.goal == goal) return planner_reply(render_sim_plan(rep, shortest_solution(script, script.initial)));
    }
    throw MockMiss("scripted planner knows no task with goal '" + goal + "'");
  }

  MockOutcome replan(const ChatRequest& request) const {
    const auto& [script, state] = locate(request);
    std::string plan = std::string(kRevisedHeader);
    std::size_t n = 1;
    for (const auto& a : shortest_solution(*script, state)) plan += "\n" + std::to_string(n++) + ". " + capitalized(describe(a)) + ".";
    return planner_reply(plan);
  }

  MockOutcome act(const ChatRequest& request) const {
    const auto& [script, state] = locate(request);
    const auto remaining = shortest_solution(*script, state);
    if (remaining.empty()) return std::string("<action>noop()</action>");

    const auto prompt = last_text(request);
    const auto shape = classify_plan_shape(between(prompt, "# Plan\n", "\n\n# Action history"));
    const double skill =
        shape == PlanShape::Revised ? profile_.dynamic_skill : profile_.static_skill[static_cast<std::size_t>(shape)];
    const std::uint64_t seed = request.seed.value_or(0);
    const bool competent = draw(seed, script->task_id, "competent") < skill * task_affinity(script->task_id);

    if (!competent) {
      // Stall after a seeded number of correct steps.
      const auto total = shortest_solution(*script, script->initial).size();
      const auto done = total - remaining.size();
      const auto stall_at = static_cast<std::size_t>(draw(seed, script->task_id, "stall") * static_cast<double>(total));
      if (done >= stall_at) {
        return std::string(shape == PlanShape::Revised ? "<action>scroll(0, 300)</action>" : "<action>noop()</action>");
      }
    }
    return "I will follow the plan.\n<action>" + remaining.front() + "</action>";
  }

  std::pair<const SimTaskScript*, std::string> locate(const ChatRequest& request) const {
    const auto state = state_in(last_text(request));
    const auto* script = world_->owner_of_state(state);
    if (script == nullptr) throw MockMiss("scripted agent cannot find a sim state in the prompt");
    return {script, state};
  }

  std::shared_ptr<const SimWorld> world_;
  SimAgentProfile profile_;
};

}  // namespace

SimAgentProfile sim_agent_profile(std::string_view name) {
  if (name == "strong") return {"strong", {0.80, 0.70, 0.60, 0.85}, 0.55};
  if (name == "weak") return {"weak", {0.45, 0.50, 0.30, 0.55}, 0.35};
  throw ValidationError("unknown sim agent profile '" + std::string(name) + "' (expected strong or weak)");
}

PlanShape classify_plan_shape(std::string_view plan) {
  if (plan.rfind(kRevisedHeader, 0) == 0) return PlanShape::Revised;
  if (plan.rfind("1.", 0) == 0) return PlanShape::Sequential;
  if (plan.rfind("- [", 0) == 0) return PlanShape::Checklist;
  if (plan.rfind("def ", 0) == 0) return PlanShape::Pseudocode;
  return PlanShape::Narrative;
}

double task_affinity(std::string_view task_id) {
  const auto bucket = std::stoul(sha256_hex(task_id).substr(0, 4), nullptr, 16) % 5;
  return bucket == 0 ? 0.0 : bucket == 1 ? 0.5 : 1.0;
}

std::string render_sim_plan(PlanRepresentation rep, const std::vector<std::string>& actions) {
  std::string out;
  switch (rep) {
    case PlanRepresentation::SequentialSubgoals:
      for (std::size_t i = 0; i < actions.size(); ++i) {
        out += (i ? "\n" : "") + std::to_string(i + 1) + ". " + capitalized(describe(actions[i])) + ".";
      }
      return out;
    case PlanRepresentation::Checklist:
      for (std::size_t i = 0; i < actions.size(); ++i) out += (i ? "\n" : "") + std::string("- [ ] ") + capitalized(describe(actions[i]));
      return out;
    case PlanRepresentation::Pseudocode:
      out = "def complete_task():";
      for (const auto& a : actions) out += "\n    " + a;
      return out + "\n\ncomplete_task()";
    case PlanRepresentation::Narrative:
      out = "To complete the task I will ";
      for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += i + 1 == actions.size() ? ", and finally " : ", then ";
        out += describe(actions[i]);
      }
      return out + ".";
  }
  return out;
}

MockScript sim_agent_script(std::shared_ptr<const SimWorld> world, const SimAgentProfile& profile,
                            std::string model_id) {
  MockScript script;
  script.model_id = std::move(model_id);
  script.responder = SimAgent(std::move(world), profile);
  return script;
}

}  // namespace planahead
