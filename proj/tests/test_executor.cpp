#include "planahead/executor.hpp"
#include "planahead/mock_model.hpp"
#include "planahead/sim_agents.hpp"
#include "planahead/sim_env.hpp"

#include <doctest.h>

using namespace planahead;

namespace {

std::string act(const std::string& action) { return "<action>" + action + "</action>"; }

std::string plan_reply(const std::string& plan) {
  return "<observation>page</observation><plan>" + plan + "</plan><thought>ok</thought>";
}

Plan fixed_plan(std::string text = "1. Fill the message box\n2. Submit") {
  Plan p;
  p.plan_text = std::move(text);
  p.planner_model_id = "planner";
  return p;
}

struct Episode {
  std::shared_ptr<const SimWorld> world = builtin_sim_world();
  SimEnvironment env{world};
  ModelGateway gateway;
  std::shared_ptr<MemoryAttemptLog> log = std::make_shared<MemoryAttemptLog>();
  EpisodeTask task;
  Observation initial;

  explicit Episode(const std::string& task_id) {
    gateway.set_default_sink(log);
    const auto spec = world->registry().at(task_id);
    task = {spec.task_id, spec.goal};
    initial = env.reset(task_id);
  }

  std::vector<std::string> tags() const {
    std::vector<std::string> out;
    for (const auto& r : log->records()) out.push_back(r.request_tag);
    return out;
  }
};

ExecutorConfig static_config() { return ExecutorConfig{}; }

ExecutorConfig dynamic_config() {
  ExecutorConfig c;
  c.mode = ExecutionMode::Dynamic;
  return c;
}

std::vector<std::string> solution_of(const std::string& task_id) {
  const auto* script = builtin_sim_world()->find(task_id);
  return shortest_solution(*script, script->initial);
}

}  // namespace

TEST_CASE("static: two correct actions solve the contact form") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  script.on("act-1", act("fill('14', 'Where is my order?')")).on("act-2", act("click('15')"));
  e.gateway.register_mock(script);
  const auto trace = run_static_episode(static_config(), e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec");
  CHECK(trace.termination == Termination::Success);
  CHECK(trace.final_reward == 1);
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.steps[0].reward == 0);
  CHECK(trace.steps[1].reward == 1);
  CHECK(trace.steps[1].done);
  REQUIRE(trace.plans.size() == 1);
  CHECK(trace.plans[0].plan_text == fixed_plan().plan_text);
  CHECK(trace.planner_calls == 0);
  CHECK(trace.executor_calls == 2);
  for (const auto& s : trace.steps) CHECK_FALSE(s.planner_called);
  CHECK(e.tags() == std::vector<std::string>{"act-1", "act-2"});
}

TEST_CASE("static: a no-op forever stops at the 30-action budget") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  script.rules.push_back({"act-*", std::nullopt, {act("noop()")}, true});
  e.gateway.register_mock(script);
  const auto trace = run_static_episode(static_config(), e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec");
  CHECK(trace.steps.size() == 30);
  CHECK(trace.termination == Termination::Budget);
  CHECK(trace.final_reward == 0);
  REQUIRE(trace.loops.size() == 1);
  CHECK(trace.loops[0] == ActionLoopFlag{0, "noop()", 30});
}

TEST_CASE("static: the plan text is the same in every step") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  std::vector<std::string> prompts;
  script.responder = [&](const ChatRequest& r, std::size_t call) -> std::optional<MockOutcome> {
    prompts.push_back(last_text(r));
    return act(call < 3 ? "noop()" : (call == 3 ? "fill('14', 'Where is my order?')" : "click('15')"));
  };
  e.gateway.register_mock(script);
  const auto plan = fixed_plan("- [ ] Write the message\n- [ ] Send it");
  const auto trace = run_static_episode(static_config(), e.task, plan, e.env, e.initial, e.gateway, "exec");
  REQUIRE(trace.steps.size() == 5);
  for (const auto& s : trace.steps) CHECK(s.plan_digest == trace.steps[0].plan_digest);
  for (const auto& p : prompts) {
    CHECK(p.find(plan.plan_text) != std::string::npos);
    CHECK(p.find(e.task.goal) != std::string::npos);
  }
  CHECK(prompts[0].find("(none)") != std::string::npos);
  CHECK(prompts[4].find("1. noop()") != std::string::npos);
}

TEST_CASE("static: an empty plan is rejected before any model call") {
  Episode e("sim.contact_form");
  e.gateway.register_mock(MockScript{"exec", {}, {}});
  CHECK_THROWS_AS(
      run_static_episode(static_config(), e.task, fixed_plan("  \n "), e.env, e.initial, e.gateway, "exec"),
      ValidationError);
  CHECK(e.log->records().empty());
  CHECK_THROWS_AS(run_static_episode(dynamic_config(), e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec"),
                  ValidationError);
}

TEST_CASE("static: replies without a usable action are re-asked") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  script.on("act-1", std::string("I think I should fill the box."))
      .on("act-1.1", act("dance()"))
      .on("act-1.2", act("fill('14', 'Where is my order?')"))
      .on("act-2", act("click('15')"));
  e.gateway.register_mock(script);
  const auto trace = run_static_episode(static_config(), e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec");
  CHECK(trace.termination == Termination::Success);
  CHECK(trace.steps[0].retries == 2);
  CHECK(trace.executor_calls == 4);
  CHECK(e.tags() == std::vector<std::string>{"act-1", "act-1.1", "act-1.2", "act-2"});
}

TEST_CASE("static: exhausting re-asks ends the episode with an error") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  script.rules.push_back({"act-*", std::nullopt, {std::string("no tags here")}, true});
  e.gateway.register_mock(script);
  const auto trace = run_static_episode(static_config(), e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec");
  CHECK(trace.termination == Termination::Error);
  CHECK(trace.final_reward == 0);
  CHECK(trace.steps.empty());
  CHECK(trace.executor_calls == 3);
  CHECK(trace.error.find("no usable action") != std::string::npos);
}

TEST_CASE("static: rejected actions consume budget and other env failures end the episode") {
  struct Picky final : Environment {
    SimEnvironment inner{builtin_sim_world()};
    std::size_t steps = 0;
    bool fail_hard = false;
    Observation reset(const std::string& id) override { return inner.reset(id); }
    StepResult step(const std::string& a) override {
      ++steps;
      if (fail_hard) throw ProtocolError("transport", "connection reset");
      if (a == "noop()") throw ProtocolError("invalid-action", "noop is disabled here");
      return inner.step(a);
    }
    std::vector<std::string> describe_actions() override { return inner.describe_actions(); }
  } env;
  const auto initial = env.reset("sim.contact_form");
  ModelGateway gateway;
  MockScript script;
  script.model_id = "exec";
  script.rules.push_back({"act-*", std::nullopt, {act("noop()")}, true});
  gateway.register_mock(script);
  ExecutorConfig config;
  config.max_actions = 5;
  const EpisodeTask task{"sim.contact_form", "send it"};
  auto trace = run_static_episode(config, task, fixed_plan(), env, initial, gateway, "exec");
  CHECK(trace.termination == Termination::Budget);
  CHECK(trace.steps.size() == 5);
  for (const auto& s : trace.steps) CHECK(s.rejected);

  env.fail_hard = true;
  env.reset("sim.contact_form");
  trace = run_static_episode(config, task, fixed_plan(), env, initial, gateway, "exec");
  CHECK(trace.termination == Termination::Error);
  CHECK(trace.steps.size() == 1);
  CHECK(trace.error.find("transport") != std::string::npos);
}

TEST_CASE("static: the observation fields used are recorded") {
  Episode e("sim.contact_form");
  MockScript script;
  script.model_id = "exec";
  ChatRequest seen;
  script.responder = [&](const ChatRequest& r, std::size_t) -> std::optional<MockOutcome> {
    seen = r;
    return act("noop()");
  };
  e.gateway.register_mock(script);
  ExecutorConfig config;
  config.max_actions = 1;
  config.fields = {false, true, true};
  const auto trace = run_static_episode(config, e.task, fixed_plan(), e.env, e.initial, e.gateway, "exec");
  CHECK(trace.steps[0].modalities == std::vector<std::string>{"html", "screenshot"});
  CHECK(last_text(seen).find("## HTML") != std::string::npos);
  CHECK(last_text(seen).find("## Accessibility tree") == std::string::npos);
  CHECK(seen.temperature == 0.0);
  CHECK(std::holds_alternative<ImagePart>(seen.messages.back().parts.back()));
}

TEST_CASE("static: identical inputs give identical traces") {
  auto once = [] {
    Episode e("sim.newsletter");
    e.gateway.register_mock(sim_agent_script(e.world, sim_agent_profile("strong"), "agent"));
    auto config = static_config();
    config.seed = 99;
    Plan plan = fixed_plan(render_sim_plan(PlanRepresentation::Checklist, solution_of("sim.newsletter")));
    plan.representation = PlanRepresentation::Checklist;
    return trace_to_jsonl(run_static_episode(config, e.task, plan, e.env, e.initial, e.gateway, "agent"));
  };
  CHECK(once() == once());
}

TEST_CASE("dynamic: a three-step task records one plan per step") {
  const auto solution = solution_of("sim.forum_post");
  REQUIRE(solution.size() == 3);
  Episode e("sim.forum_post");
  MockScript script;
  script.model_id = "agent";
  for (std::size_t i = 0; i < 3; ++i) {
    const auto step = std::to_string(i + 1);
    script.on("replan-" + step, plan_reply("Remaining steps:\n1. " + solution[i]));
    script.on("act-" + step, act(solution[i]));
  }
  e.gateway.register_mock(script);
  const auto trace = run_dynamic_episode(dynamic_config(), e.task, e.env, e.initial, e.gateway, "agent", "agent");
  CHECK(trace.termination == Termination::Success);
  CHECK(trace.plans.size() == 3);
  CHECK(trace.planner_calls == 3);
  CHECK(trace.executor_calls == 3);
  for (const auto& s : trace.steps) CHECK(s.planner_called);
  CHECK(e.tags() == std::vector<std::string>{"replan-1", "act-1", "replan-2", "act-2", "replan-3", "act-3"});
  CHECK(trace.plans[1].plan_text == "Remaining steps:\n1. " + solution[1]);
}

TEST_CASE("dynamic: a stalling agent makes 30 planner and 30 action calls") {
  Episode e("sim.forum_post");
  MockScript script;
  script.model_id = "agent";
  script.rules.push_back({"replan-*", std::nullopt, {plan_reply("1. Scroll down")}, true});
  script.rules.push_back({"act-*", std::nullopt, {act("scroll(0, 300)")}, true});
  e.gateway.register_mock(script);
  const auto trace = run_dynamic_episode(dynamic_config(), e.task, e.env, e.initial, e.gateway, "agent", "agent");
  CHECK(trace.termination == Termination::Budget);
  CHECK(trace.steps.size() == 30);
  CHECK(trace.plans.size() == 30);
  CHECK(trace.planner_calls == 30);
  CHECK(trace.executor_calls == 30);
  CHECK(e.log->records().size() == 60);
}

TEST_CASE("dynamic: the replan prompt carries the previous plan") {
  Episode e("sim.forum_post");
  MockScript script;
  script.model_id = "agent";
  std::vector<std::string> replans;
  script.responder = [&](const ChatRequest& r, std::size_t) -> std::optional<MockOutcome> {
    if (r.request_tag.starts_with("replan-")) {
      replans.push_back(last_text(r));
      return plan_reply("plan v" + std::to_string(replans.size()));
    }
    return act("noop()");
  };
  e.gateway.register_mock(script);
  auto config = dynamic_config();
  config.max_actions = 3;
  run_dynamic_episode(config, e.task, e.env, e.initial, e.gateway, "agent", "agent");
  REQUIRE(replans.size() == 3);
  CHECK(replans[1].find("plan v1") != std::string::npos);
  CHECK(replans[2].find("plan v2") != std::string::npos);
}

TEST_CASE("dynamic: a failed replan ends the episode and keeps the partial trace") {
  const auto solution = solution_of("sim.forum_post");
  Episode e("sim.forum_post");
  MockScript script;
  script.model_id = "agent";
  script.on("replan-1", plan_reply("1. " + solution[0]));
  script.on("act-1", act(solution[0]));
  script.rules.push_back({"replan-2*", std::nullopt, {std::string("no plan today")}, true});
  e.gateway.register_mock(script);
  const auto trace = run_dynamic_episode(dynamic_config(), e.task, e.env, e.initial, e.gateway, "agent", "agent");
  CHECK(trace.termination == Termination::Error);
  CHECK(trace.final_reward == 0);
  CHECK(trace.steps.size() == 1);
  CHECK(trace.plans.size() == 1);
  CHECK(trace.planner_calls == 4);  // 1 + (1 + 2 re-asks)
  CHECK(trace.error.find("plan regeneration failed at step 2") != std::string::npos);
}

TEST_CASE("dynamic: planner and executor must be the same model") {
  Episode e("sim.forum_post");
  CHECK_THROWS_AS(run_dynamic_episode(dynamic_config(), e.task, e.env, e.initial, e.gateway, "a", "b"),
                  ValidationError);
  CHECK_THROWS_AS(run_dynamic_episode(static_config(), e.task, e.env, e.initial, e.gateway, "a", "a"),
                  ValidationError);
}

TEST_CASE("loop detection examples") {
  CHECK(detect_action_loops({"a", "a", "a", "b"}, 3) == std::vector<ActionLoopFlag>{{0, "a", 3}});
  CHECK(detect_action_loops({"a", "b", "a", "b"}, 3).empty());
  CHECK(detect_action_loops({"a", "a", "b", "b", "b", "b"}, 2) ==
        std::vector<ActionLoopFlag>{{0, "a", 2}, {2, "b", 4}});
  CHECK(detect_action_loops({" fill('52',  '45') ", "fill('52', '45')", "fill('52', '45')"}, 3).size() == 1);
  CHECK_THROWS_AS(detect_action_loops(std::vector<std::string>{"a"}, 1), ValidationError);
}

TEST_CASE("loop detection on the price-decrement pattern") {
  // The agent lowers the price, then keeps pressing the same decrement
  // until the budget runs out.
  std::vector<std::string> actions{"click('51')"};
  for (int i = 0; i < 29; ++i) actions.push_back("press('52', 'ArrowDown')");
  const auto flags = detect_action_loops(actions, 3);
  REQUIRE(flags.size() == 1);
  CHECK(flags[0] == ActionLoopFlag{1, "press('52', 'ArrowDown')", 29});

  std::vector<std::string> all_same(30, "press('52', 'ArrowDown')");
  CHECK(detect_action_loops(all_same, 3) == std::vector<ActionLoopFlag>{{0, "press('52', 'ArrowDown')", 30}});
}

TEST_CASE("trace jsonl round trip and truncation") {
  Episode e("sim.forum_post");
  MockScript script;
  script.model_id = "agent";
  script.rules.push_back({"replan-*", std::nullopt, {plan_reply("1. Scroll")}, true});
  script.rules.push_back({"act-*", std::nullopt, {act("scroll(0, 300)")}, true});
  e.gateway.register_mock(script);
  auto config = dynamic_config();
  config.max_actions = 4;
  const auto trace = run_dynamic_episode(config, e.task, e.env, e.initial, e.gateway, "agent", "agent");
  const auto text = trace_to_jsonl(trace);
  const auto back = trace_from_jsonl(text);
  CHECK(trace_to_jsonl(back) == text);
  CHECK(back.loops == trace.loops);
  CHECK(back.plans.size() == 4);

  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  CHECK_THROWS_WITH_AS(trace_from_jsonl(cut), "trace is truncated", ValidationError);
  CHECK_THROWS_AS(trace_from_jsonl(""), ValidationError);
}

TEST_CASE("extract_action takes the first trimmed action") {
  CHECK(extract_action("think <action> click('1') </action> <action>noop()</action>") == "click('1')");
  CHECK_FALSE(extract_action("<action>  </action>").has_value());
  CHECK_FALSE(extract_action("<action>click('1')").has_value());
}

TEST_CASE("executor config validation") {
  ExecutorConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_actions = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.temperature = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.loop_window = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("sim plans are recognisable by shape") {
  const std::vector<std::string> actions{"fill('14', 'x')", "click('15')"};
  CHECK(classify_plan_shape(render_sim_plan(PlanRepresentation::SequentialSubgoals, actions)) == PlanShape::Sequential);
  CHECK(classify_plan_shape(render_sim_plan(PlanRepresentation::Checklist, actions)) == PlanShape::Checklist);
  CHECK(classify_plan_shape(render_sim_plan(PlanRepresentation::Pseudocode, actions)) == PlanShape::Pseudocode);
  CHECK(classify_plan_shape(render_sim_plan(PlanRepresentation::Narrative, actions)) == PlanShape::Narrative);
  CHECK(classify_plan_shape("Remaining steps:\n1. click('15')") == PlanShape::Revised);
}

TEST_CASE("sim agent planner answers every representation with a parseable plan") {
  const auto world = builtin_sim_world();
  ModelGateway gateway;
  gateway.register_mock(sim_agent_script(world, sim_agent_profile("strong"), "agent"));
  for (auto rep : kAllRepresentations) {
    PlannerRequest req{rep, world->registry().at("sim.newsletter").goal, placeholder_screenshot("x"), 0.6, 3};
    const auto plan = generate_plan(gateway, "agent", req);
    CHECK(plan.retries == 0);
    const auto shape = classify_plan_shape(plan.plan_text);
    CHECK(static_cast<int>(shape) == static_cast<int>(rep));
  }
  CHECK_THROWS_AS(sim_agent_profile("mediocre"), ValidationError);
}

TEST_CASE("a competent strong agent solves every solvable sim task") {
  // Over many seeds at least one episode of every task with positive
  // affinity succeeds, and every episode stays within budget.
  const auto world = builtin_sim_world();
  ModelGateway gateway;
  gateway.register_mock(sim_agent_script(world, sim_agent_profile("strong"), "agent"));
  for (const auto& script : world->scripts()) {
    if (script.task_id == kLoopbackTaskId) continue;
    bool solved = false;
    for (std::uint64_t seed = 0; seed < 20 && !solved; ++seed) {
      SimEnvironment env(world);
      const auto initial = env.reset(script.task_id);
      PlannerRequest req{PlanRepresentation::SequentialSubgoals, script.goal, *initial.screenshot, 0.6, seed};
      const auto plan = generate_plan(gateway, "agent", req);
      ExecutorConfig config;
      config.seed = seed;
      const auto trace = run_static_episode(config, {script.task_id, script.goal}, plan, env, initial, gateway, "agent");
      CHECK(trace.steps.size() <= 30);
      solved = trace.final_reward == 1;
    }
    CHECK(solved == (task_affinity(script.task_id) > 0.0));
  }
}
