#include "planahead/executor.hpp"

#include "planahead/digest.hpp"
#include "planahead/sim_env.hpp"

#include <json.hpp>

#include <sstream>

namespace planahead {

using nlohmann::json;

namespace {

constexpr std::string_view kWhitespace = " \t\r\n";

std::string trimmed(std::string_view text) {
  const auto first = text.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  return std::string(text.substr(first, text.find_last_not_of(kWhitespace) - first + 1));
}

std::string numbered(const std::vector<std::string>& lines) {
  if (lines.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + lines[i];
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

// Observation text for a prompt plus the list of fields actually used.
std::pair<std::string, std::vector<std::string>> render_observation(const Observation& o,
                                                                    const ObservationFields& fields) {
  std::string text = "URL: " + o.url;
  std::vector<std::string> used;
  if (fields.axtree && o.axtree) {
    text += "\n\n## Accessibility tree\n" + trimmed(*o.axtree);
    used.emplace_back("axtree");
  }
  if (fields.html && o.html) {
    text += "\n\n## HTML\n" + trimmed(*o.html);
    used.emplace_back("html");
  }
  if (fields.screenshot && o.screenshot) used.emplace_back("screenshot");
  if (used.empty()) text += "\n\n(no observation fields available)";
  return {text, used};
}

std::string tag_for(std::string_view kind, std::size_t step, std::size_t retry) {
  auto tag = std::string(kind) + "-" + std::to_string(step);
  if (retry) tag += "." + std::to_string(retry);
  return tag;
}

class EpisodeRunner {
 public:
  EpisodeRunner(const ExecutorConfig& config, const EpisodeTask& task, Environment& env, ChatClient& client,
                const PromptCorpus& corpus)
      : config_(config), task_(task), env_(env), client_(client), corpus_(corpus) {}

  EpisodeTrace run(EpisodeTrace trace, const Observation& initial, const std::optional<Plan>& fixed_plan) {
    trace_ = std::move(trace);
    trace_.task_id = task_.task_id;
    trace_.goal = task_.goal;
    trace_.mode = config_.mode;
    Observation current = initial;
    try {
      templates_ = env_.describe_actions();
    } catch (const Error& e) {
      return finish(Termination::Error, std::string("describe_actions failed: ") + e.what());
    }

    for (std::size_t step = 1; step <= config_.max_actions; ++step) {
      StepRecord record;
      record.observation_digest = observation_digest(current);

      std::string plan_text;
      if (fixed_plan) {
        plan_text = fixed_plan->plan_text;
      } else {
        auto plan = replan(step, current);
        if (!plan) return finish(Termination::Error, "plan regeneration failed at step " + std::to_string(step));
        plan_text = plan->plan_text;
        record.planner_called = true;
        trace_.plans.push_back(std::move(*plan));
      }
      record.plan_digest = sha256_hex(plan_text);

      auto chosen = choose_action(step, plan_text, current, record);
      if (!chosen) {
        return finish(Termination::Error, "no usable action at step " + std::to_string(step) + ": " + last_error_);
      }
      record.action = *chosen;

      try {
        auto result = env_.step(record.action);
        record.reward = result.reward;
        record.done = result.done;
        current = std::move(result.observation);
      } catch (const ProtocolError& e) {
        if (e.code() != protocol_code::kInvalidAction) {
          trace_.steps.push_back(std::move(record));
          return finish(Termination::Error, std::string("environment failure: ") + e.what());
        }
        record.rejected = true;
      } catch (const Error& e) {
        trace_.steps.push_back(std::move(record));
        return finish(Termination::Error, std::string("environment failure: ") + e.what());
      }
      history_.push_back(record.action);
      const bool done = record.done;
      const int reward = record.reward;
      trace_.steps.push_back(std::move(record));
      if (done) {
        trace_.final_reward = reward;
        return finish(reward == 1 ? Termination::Success : Termination::EnvDone, {});
      }
    }
    return finish(Termination::Budget, {});
  }

 private:
  EpisodeTrace finish(Termination termination, std::string error) {
    trace_.termination = termination;
    trace_.error = std::move(error);
    if (termination != Termination::Success && termination != Termination::EnvDone) trace_.final_reward = 0;
    trace_.loops = detect_action_loops(trace_, config_.loop_window);
    return std::move(trace_);
  }

  ChatMessage user_message(std::string text, const Observation& o, bool with_screenshot) const {
    ChatMessage message{Role::User, {std::move(text)}};
    if (with_screenshot && o.screenshot && !o.screenshot->empty()) message.parts.emplace_back(*o.screenshot);
    return message;
  }

  std::optional<std::string> choose_action(std::size_t step, const std::string& plan_text, const Observation& o,
                                           StepRecord& record) {
    auto [observation_text, modalities] = render_observation(o, config_.fields);
    record.modalities = std::move(modalities);
    ChatRequest request;
    request.model_id = trace_.executor_model_id;
    request.temperature = config_.temperature;
    request.seed = config_.seed;
    request.messages.push_back(
        {Role::System,
         {fill_template(trimmed(corpus_.text("executor/system.txt")), {{"actions", join_lines(templates_)}})}});
    request.messages.push_back(user_message(fill_template(trimmed(corpus_.text("executor/user.txt")),
                                                          {{"goal", task_.goal},
                                                           {"plan", plan_text},
                                                           {"history", numbered(history_)},
                                                           {"observation", observation_text}}),
                                            o, config_.fields.screenshot));
    record.prompt_digest = request_digest(request);

    for (std::size_t retry = 0; retry <= config_.action_retry_budget; ++retry) {
      request.request_tag = tag_for("act", step, retry);
      ++trace_.executor_calls;
      const auto reply = client_.complete(request);
      record.retries = retry;
      auto action = extract_action(reply.text);
      if (!action) {
        last_error_ = "reply has no <action> tag";
        continue;
      }
      if (!action_in_set(*action, templates_)) {
        last_error_ = "action '" + *action + "' is outside the declared action set";
        continue;
      }
      return action;
    }
    return std::nullopt;
  }

  std::optional<Plan> replan(std::size_t step, const Observation& o) {
    const std::string progress =
        step == 1 ? trimmed(corpus_.text("executor/replan_initial.txt"))
                  : fill_template(trimmed(corpus_.text("executor/replan_progress.txt")),
                                  {{"step", std::to_string(step - 1)}, {"previous_plan", trace_.plans.back().plan_text}});
    ChatRequest request;
    request.model_id = trace_.planner_model_id;
    request.temperature = config_.temperature;
    request.seed = config_.seed;
    request.messages.push_back({Role::System, {trimmed(corpus_.text("executor/replan_system.txt"))}});
    request.messages.push_back(user_message(fill_template(trimmed(corpus_.text("executor/replan_user.txt")),
                                                          {{"goal", task_.goal},
                                                           {"progress", progress},
                                                           {"history", numbered(history_)},
                                                           {"observation", render_observation(o, config_.fields).first}}),
                                            o, true));
    TokenUsage usage;
    for (std::size_t retry = 0; retry <= config_.action_retry_budget; ++retry) {
      request.request_tag = tag_for("replan", step, retry);
      ++trace_.planner_calls;
      auto reply = client_.complete(request);
      usage += reply.usage;
      try {
        auto sections = parse_planner_output(reply.text);
        Plan plan;
        plan.representation = PlanRepresentation::SequentialSubgoals;
        plan.observation_text = std::move(sections.observation);
        plan.plan_text = std::move(sections.plan);
        plan.thought_text = std::move(sections.thought);
        plan.raw_output = std::move(reply.text);
        plan.planner_model_id = trace_.planner_model_id;
        plan.retries = retry;
        plan.usage = usage;
        return plan;
      } catch (const ParseError&) {
      }
    }
    return std::nullopt;
  }

  const ExecutorConfig& config_;
  const EpisodeTask& task_;
  Environment& env_;
  ChatClient& client_;
  const PromptCorpus& corpus_;
  EpisodeTrace trace_;
  std::vector<std::string> templates_;
  std::vector<std::string> history_;
  std::string last_error_;
};

void check_task(const EpisodeTask& task) {
  if (task.task_id.empty()) throw ValidationError("episode needs a task id");
  if (task.goal.empty()) throw ValidationError("episode needs a goal");
}

json usage_json(const TokenUsage& u) { return {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}}; }

TokenUsage usage_from(const json& j) {
  return TokenUsage{j.at("input_tokens").get<std::uint64_t>(), j.at("output_tokens").get<std::uint64_t>()};
}

}  // namespace

std::string_view to_string(ExecutionMode mode) { return mode == ExecutionMode::Static ? "static" : "dynamic"; }

ExecutionMode parse_mode(std::string_view name) {
  if (name == "static") return ExecutionMode::Static;
  if (name == "dynamic") return ExecutionMode::Dynamic;
  throw ValidationError("unknown mode '" + std::string(name) + "' (expected static or dynamic)");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Success: return "success";
    case Termination::Budget: return "budget";
    case Termination::EnvDone: return "env_done";
    case Termination::Error: return "error";
  }
  return "error";
}

Termination parse_termination(std::string_view name) {
  for (auto t : {Termination::Success, Termination::Budget, Termination::EnvDone, Termination::Error}) {
    if (to_string(t) == name) return t;
  }
  throw ValidationError("unknown termination '" + std::string(name) + "'");
}

void ExecutorConfig::validate() const {
  if (max_actions < 1) throw ValidationError("max_actions must be at least 1");
  if (!(temperature >= 0.0)) throw ValidationError("executor temperature must be >= 0");
  if (loop_window < 2) throw ValidationError("loop_window must be at least 2");
}

std::string observation_digest(const Observation& o) {
  json j = {{"url", o.url}, {"step_index", o.step_index}};
  if (o.axtree) j["axtree"] = *o.axtree;
  if (o.html) j["html"] = *o.html;
  if (o.screenshot) j["screenshot"] = {{"media_type", o.screenshot->media_type}, {"sha256", sha256_hex(o.screenshot->bytes)}};
  return sha256_hex(j.dump());
}

std::string request_digest(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json parts = json::array();
    for (const auto& part : m.parts) {
      if (const auto* text = std::get_if<std::string>(&part)) {
        parts.push_back({{"text", *text}});
      } else {
        const auto& image = std::get<ImagePart>(part);
        parts.push_back({{"image", sha256_hex(image.bytes)}, {"media_type", image.media_type}});
      }
    }
    messages.push_back({{"role", to_string(m.role)}, {"parts", std::move(parts)}});
  }
  json j = {{"model", request.model_id}, {"temperature", request.temperature}, {"messages", std::move(messages)}};
  return sha256_hex(j.dump());
}

std::optional<std::string> extract_action(std::string_view reply) {
  constexpr std::string_view kOpen = "<action>", kClose = "</action>";
  const auto open = reply.find(kOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = reply.find(kClose, open + kOpen.size());
  if (close == std::string_view::npos) return std::nullopt;
  auto action = trimmed(reply.substr(open + kOpen.size(), close - open - kOpen.size()));
  if (action.empty()) return std::nullopt;
  return action;
}

EpisodeTrace run_static_episode(const ExecutorConfig& config, const EpisodeTask& task, const Plan& plan,
                                Environment& env, const Observation& initial, ChatClient& client,
                                const std::string& executor_model_id, const PromptCorpus& corpus) {
  config.validate();
  check_task(task);
  if (config.mode != ExecutionMode::Static) throw ValidationError("run_static_episode needs a static config");
  if (trimmed(plan.plan_text).empty()) throw ValidationError("static episode needs a non-empty plan");
  EpisodeTrace trace;
  trace.planner_model_id = plan.planner_model_id;
  trace.executor_model_id = executor_model_id;
  trace.plans.push_back(plan);
  return EpisodeRunner(config, task, env, client, corpus).run(std::move(trace), initial, plan);
}

EpisodeTrace run_dynamic_episode(const ExecutorConfig& config, const EpisodeTask& task, Environment& env,
                                 const Observation& initial, ChatClient& client, const std::string& planner_model_id,
                                 const std::string& executor_model_id, const PromptCorpus& corpus) {
  config.validate();
  check_task(task);
  if (config.mode != ExecutionMode::Dynamic) throw ValidationError("run_dynamic_episode needs a dynamic config");
  if (planner_model_id != executor_model_id) {
    throw ValidationError("dynamic mode is single-agent: planner '" + planner_model_id + "' differs from executor '" +
                          executor_model_id + "'");
  }
  EpisodeTrace trace;
  trace.planner_model_id = planner_model_id;
  trace.executor_model_id = executor_model_id;
  return EpisodeRunner(config, task, env, client, corpus).run(std::move(trace), initial, std::nullopt);
}

std::vector<ActionLoopFlag> detect_action_loops(const std::vector<std::string>& actions, std::size_t window) {
  if (window < 2) throw ValidationError("loop window must be at least 2");
  std::vector<ActionLoopFlag> flags;
  std::size_t start = 0;
  while (start < actions.size()) {
    const auto action = normalize_action(actions[start]);
    std::size_t end = start + 1;
    while (end < actions.size() && normalize_action(actions[end]) == action) ++end;
    if (end - start >= window) flags.push_back({start, action, end - start});
    start = end;
  }
  return flags;
}

std::vector<ActionLoopFlag> detect_action_loops(const EpisodeTrace& trace, std::size_t window) {
  std::vector<std::string> actions;
  for (const auto& s : trace.steps) actions.push_back(s.action);
  return detect_action_loops(actions, window);
}

// ---- serialization --------------------------------------------------------

std::string trace_to_jsonl(const EpisodeTrace& t) {
  json plans = json::array();
  for (const auto& p : t.plans) {
    plans.push_back({{"representation", to_string(p.representation)},
                     {"observation", p.observation_text},
                     {"plan", p.plan_text},
                     {"thought", p.thought_text},
                     {"raw_output", p.raw_output},
                     {"planner_model_id", p.planner_model_id},
                     {"retries", p.retries},
                     {"usage", usage_json(p.usage)}});
  }
  json loops = json::array();
  for (const auto& l : t.loops) {
    loops.push_back({{"start_index", l.start_index}, {"action", l.action}, {"repeat_count", l.repeat_count}});
  }
  json header = {{"record", "episode"},
                 {"task_id", t.task_id},
                 {"goal", t.goal},
                 {"mode", to_string(t.mode)},
                 {"planner_model_id", t.planner_model_id},
                 {"executor_model_id", t.executor_model_id},
                 {"plans", std::move(plans)},
                 {"final_reward", t.final_reward},
                 {"termination", to_string(t.termination)},
                 {"error", t.error},
                 {"planner_calls", t.planner_calls},
                 {"executor_calls", t.executor_calls},
                 {"step_count", t.steps.size()},
                 {"loops", std::move(loops)}};
  std::string out = header.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    json step = {{"record", "step"},
                 {"index", i},
                 {"observation_digest", s.observation_digest},
                 {"prompt_digest", s.prompt_digest},
                 {"plan_digest", s.plan_digest},
                 {"action", s.action},
                 {"planner_called", s.planner_called},
                 {"reward", s.reward},
                 {"done", s.done},
                 {"rejected", s.rejected},
                 {"retries", s.retries},
                 {"modalities", s.modalities}};
    out += step.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  }
  return out;
}

EpisodeTrace trace_from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  EpisodeTrace t;
  bool have_header = false;
  std::size_t expected_steps = 0;
  try {
    while (std::getline(in, line)) {
      if (trimmed(line).empty()) continue;
      const auto j = json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "episode") {
        if (have_header) throw ValidationError("trace has two header records");
        have_header = true;
        t.task_id = j.at("task_id").get<std::string>();
        t.goal = j.at("goal").get<std::string>();
        t.mode = parse_mode(j.at("mode").get<std::string>());
        t.planner_model_id = j.at("planner_model_id").get<std::string>();
        t.executor_model_id = j.at("executor_model_id").get<std::string>();
        for (const auto& p : j.at("plans")) {
          Plan plan;
          plan.representation = parse_representation(p.at("representation").get<std::string>());
          plan.observation_text = p.at("observation").get<std::string>();
          plan.plan_text = p.at("plan").get<std::string>();
          plan.thought_text = p.at("thought").get<std::string>();
          plan.raw_output = p.at("raw_output").get<std::string>();
          plan.planner_model_id = p.at("planner_model_id").get<std::string>();
          plan.retries = p.at("retries").get<std::size_t>();
          plan.usage = usage_from(p.at("usage"));
          t.plans.push_back(std::move(plan));
        }
        t.final_reward = j.at("final_reward").get<int>();
        t.termination = parse_termination(j.at("termination").get<std::string>());
        t.error = j.at("error").get<std::string>();
        t.planner_calls = j.at("planner_calls").get<std::size_t>();
        t.executor_calls = j.at("executor_calls").get<std::size_t>();
        expected_steps = j.at("step_count").get<std::size_t>();
        for (const auto& l : j.at("loops")) {
          t.loops.push_back({l.at("start_index").get<std::size_t>(), l.at("action").get<std::string>(),
                             l.at("repeat_count").get<std::size_t>()});
        }
      } else if (kind == "step") {
        if (!have_header) throw ValidationError("trace step before header");
        StepRecord s;
        s.observation_digest = j.at("observation_digest").get<std::string>();
        s.prompt_digest = j.at("prompt_digest").get<std::string>();
        s.plan_digest = j.at("plan_digest").get<std::string>();
        s.action = j.at("action").get<std::string>();
        s.planner_called = j.at("planner_called").get<bool>();
        s.reward = j.at("reward").get<int>();
        s.done = j.at("done").get<bool>();
        s.rejected = j.at("rejected").get<bool>();
        s.retries = j.at("retries").get<std::size_t>();
        s.modalities = j.at("modalities").get<std::vector<std::string>>();
        t.steps.push_back(std::move(s));
      } else {
        throw ValidationError("unknown trace record '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed trace: ") + e.what());
  }
  if (!have_header) throw ValidationError("trace has no header record");
  if (t.steps.size() != expected_steps) throw ValidationError("trace is truncated");
  return t;
}

}  // namespace planahead
