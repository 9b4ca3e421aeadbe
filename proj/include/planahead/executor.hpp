#pragma once

#include "planahead/env_protocol.hpp"
#include "planahead/model_gateway.hpp"
#include "planahead/plan_engine.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace planahead {

enum class ExecutionMode { Static, Dynamic };

std::string_view to_string(ExecutionMode mode);
ExecutionMode parse_mode(std::string_view name);

// Which observation fields go into executor prompts. The screenshot travels
// as an image part, the others as text.
struct ObservationFields {
  bool axtree = true;
  bool html = true;
  bool screenshot = false;
};

struct ExecutorConfig {
  std::size_t max_actions = 30;
  double temperature = 0.0;
  ExecutionMode mode = ExecutionMode::Static;
  std::size_t loop_window = 3;
  // Re-asks allowed per step when the reply has no usable action (and, in
  // dynamic mode, when the regenerated plan does not parse).
  std::size_t action_retry_budget = 2;
  ObservationFields fields;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

struct EpisodeTask {
  std::string task_id;
  std::string goal;
};

struct StepRecord {
  std::string observation_digest;  // the observation the action was chosen on
  std::string prompt_digest;
  std::string plan_digest;
  std::string action;
  bool planner_called = false;
  int reward = 0;
  bool done = false;
  bool rejected = false;  // the environment refused the action
  std::size_t retries = 0;
  std::vector<std::string> modalities;
};

enum class Termination { Success, Budget, EnvDone, Error };

std::string_view to_string(Termination termination);
Termination parse_termination(std::string_view name);

struct ActionLoopFlag {
  std::size_t start_index = 0;
  std::string action;
  std::size_t repeat_count = 0;

  friend bool operator==(const ActionLoopFlag&, const ActionLoopFlag&) = default;
};

struct EpisodeTrace {
  std::string task_id;
  std::string goal;
  ExecutionMode mode = ExecutionMode::Static;
  std::string planner_model_id;
  std::string executor_model_id;
  // Static: the single plan. Dynamic: one plan per step, in step order.
  std::vector<Plan> plans;
  std::vector<StepRecord> steps;
  int final_reward = 0;
  Termination termination = Termination::Error;
  std::string error;
  std::size_t planner_calls = 0;   // model calls made to obtain plans
  std::size_t executor_calls = 0;  // model calls made to obtain actions
  std::vector<ActionLoopFlag> loops;
};

// Canonical digests used for replay comparison.
std::string observation_digest(const Observation& observation);
std::string request_digest(const ChatRequest& request);

// The text of the first <action>...</action> pair, trimmed; nullopt if absent
// or empty.
std::optional<std::string> extract_action(std::string_view reply);

// Drives one episode with a fixed plan. The environment must already be reset
// to `task`, `initial` being the observation reset returned. Gateway failures
// propagate; unusable replies and environment failures end the episode with
// termination Error and reward 0. Request tags are "act-<step>" (with
// ".<retry>" suffixes on re-asks).
EpisodeTrace run_static_episode(const ExecutorConfig& config, const EpisodeTask& task, const Plan& plan,
                                Environment& env, const Observation& initial, ChatClient& client,
                                const std::string& executor_model_id,
                                const PromptCorpus& corpus = PromptCorpus::builtin());

// Single-agent baseline: before every action the same model rewrites a
// sequential plan from the previous plan and its progress ("replan-<step>"),
// then picks the action ("act-<step>").
EpisodeTrace run_dynamic_episode(const ExecutorConfig& config, const EpisodeTask& task, Environment& env,
                                 const Observation& initial, ChatClient& client, const std::string& planner_model_id,
                                 const std::string& executor_model_id,
                                 const PromptCorpus& corpus = PromptCorpus::builtin());

// Every maximal run of at least `window` consecutive identical normalized
// actions. Throws ValidationError if window < 2.
std::vector<ActionLoopFlag> detect_action_loops(const std::vector<std::string>& actions, std::size_t window);
std::vector<ActionLoopFlag> detect_action_loops(const EpisodeTrace& trace, std::size_t window);

// One header line followed by one line per step.
std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(std::string_view text);

}  // namespace planahead
