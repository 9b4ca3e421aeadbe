#include "planahead/config.hpp"

#include "planahead/line_channel.hpp"
#include "planahead/mock_model.hpp"
#include "planahead/sim_agents.hpp"
#include "planahead/sim_env.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace planahead {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ValidationError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

std::vector<std::string> builtin_task_ids() {
  std::vector<std::string> ids;
  for (const auto& s : builtin_sim_world()->scripts()) {
    if (s.task_id != kLoopbackTaskId) ids.push_back(s.task_id);
  }
  return ids;
}

ExperimentGrid parse_grid(const json& j) {
  allow_keys(j, "grid", {"planners", "executors", "representations", "tasks", "runs", "mode", "seed", "workers"});
  ExperimentGrid g;
  g.planner_ids = j.at("planners").get<std::vector<std::string>>();
  g.executor_ids = j.contains("executors") ? j["executors"].get<std::vector<std::string>>() : g.planner_ids;
  g.mode = parse_mode(get_or<std::string>(j, "mode", "static"));
  const auto reps = j.value("representations", json("all"));
  if (reps.is_string() && reps.get<std::string>() == "all") {
    g.representations = g.mode == ExecutionMode::Dynamic
                            ? std::vector{PlanRepresentation::SequentialSubgoals}
                            : std::vector(kAllRepresentations.begin(), kAllRepresentations.end());
  } else {
    for (const auto& r : reps) g.representations.push_back(parse_representation(r.get<std::string>()));
  }
  const auto tasks = j.value("tasks", json("sim"));
  if (tasks.is_string()) {
    const auto name = tasks.get<std::string>();
    if (name != "sim" && name != "all") throw ValidationError("grid.tasks must be a list, \"sim\" or \"all\"");
    // Resolved once the environment is known.
  } else {
    g.task_ids = tasks.get<std::vector<std::string>>();
  }
  g.runs = get_or<std::size_t>(j, "runs", 5);
  g.seed = get_or<std::uint64_t>(j, "seed", 0);
  g.worker_count = get_or<std::size_t>(j, "workers", 1);
  return g;
}

ModelSpec parse_model(const json& j) {
  allow_keys(j, "models[]",
             {"id", "kind", "profile", "base_url", "remote_model", "api_key_env", "rate_limit", "timeout_s"});
  ModelSpec m;
  m.id = j.at("id").get<std::string>();
  m.kind = j.at("kind").get<std::string>();
  if (m.id.empty()) throw ValidationError("model id must not be empty");
  if (m.kind == "sim-agent") {
    m.profile = get_or<std::string>(j, "profile", "strong");
    sim_agent_profile(m.profile);
    return m;
  }
  if (m.kind != "openai" && m.kind != "gemini") {
    throw ValidationError("model '" + m.id + "': kind must be sim-agent, openai or gemini");
  }
  m.provider.model_id = m.id;
  m.provider.format = parse_wire_format(m.kind);
  m.provider.base_url = j.at("base_url").get<std::string>();
  m.provider.remote_model = get_or<std::string>(j, "remote_model", m.id);
  m.provider.api_key_env = j.at("api_key_env").get<std::string>();
  m.provider.timeout = std::chrono::seconds(get_or<std::int64_t>(j, "timeout_s", 120));
  if (auto it = j.find("rate_limit"); it != j.end()) {
    allow_keys(*it, "rate_limit", {"max_requests", "interval_ms"});
    m.provider.rate_limit = RateLimit{it->at("max_requests").get<std::size_t>(),
                                      std::chrono::milliseconds(it->at("interval_ms").get<std::int64_t>())};
    if (m.provider.rate_limit->max_requests == 0) throw ValidationError("rate_limit.max_requests must be >= 1");
  }
  return m;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    const auto j = json::parse(text);
    allow_keys(j, "config", {"grid", "executor", "planner", "environment", "models", "retry", "tasks_file"});
    c.grid = parse_grid(j.at("grid"));

    if (auto it = j.find("executor"); it != j.end()) {
      allow_keys(*it, "executor",
                 {"max_actions", "temperature", "loop_window", "action_retry_budget", "observation"});
      auto& e = c.episode.executor;
      e.max_actions = get_or<std::size_t>(*it, "max_actions", e.max_actions);
      e.temperature = get_or<double>(*it, "temperature", e.temperature);
      e.loop_window = get_or<std::size_t>(*it, "loop_window", e.loop_window);
      e.action_retry_budget = get_or<std::size_t>(*it, "action_retry_budget", e.action_retry_budget);
      if (auto obs = it->find("observation"); obs != it->end()) {
        e.fields = {false, false, false};
        for (const auto& f : *obs) {
          const auto name = f.get<std::string>();
          if (name == "axtree") e.fields.axtree = true;
          else if (name == "html") e.fields.html = true;
          else if (name == "screenshot") e.fields.screenshot = true;
          else throw ValidationError("unknown observation field '" + name + "'");
        }
      }
    }
    if (auto it = j.find("planner"); it != j.end()) {
      allow_keys(*it, "planner", {"temperature", "retry_budget"});
      c.episode.planner_temperature = get_or<double>(*it, "temperature", c.episode.planner_temperature);
      c.episode.planner_retry_budget = get_or<std::size_t>(*it, "retry_budget", c.episode.planner_retry_budget);
    }
    if (auto it = j.find("environment"); it != j.end()) {
      allow_keys(*it, "environment", {"kind", "host", "port"});
      c.environment.kind = get_or<std::string>(*it, "kind", "sim");
      c.environment.host = get_or<std::string>(*it, "host", c.environment.host);
      c.environment.port = get_or<std::uint16_t>(*it, "port", 0);
      if (c.environment.kind != "sim" && c.environment.kind != "tcp") {
        throw ValidationError("environment.kind must be sim or tcp");
      }
      if (c.environment.kind == "tcp" && c.environment.port == 0) throw ValidationError("tcp environment needs a port");
    }
    if (auto it = j.find("retry"); it != j.end()) {
      allow_keys(*it, "retry", {"max_attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms"});
      c.retry.max_attempts = get_or<std::size_t>(*it, "max_attempts", c.retry.max_attempts);
      c.retry.initial_backoff = std::chrono::milliseconds(get_or<std::int64_t>(*it, "initial_backoff_ms", 500));
      c.retry.multiplier = get_or<double>(*it, "multiplier", c.retry.multiplier);
      c.retry.max_backoff = std::chrono::milliseconds(get_or<std::int64_t>(*it, "max_backoff_ms", 8000));
      if (c.retry.max_attempts < 1) throw ValidationError("retry.max_attempts must be >= 1");
    }
    if (auto it = j.find("tasks_file"); it != j.end()) c.tasks_file = base_dir / it->get<std::string>();
    std::set<std::string> ids;
    for (const auto& m : j.at("models")) {
      c.models.push_back(parse_model(m));
      if (!ids.insert(c.models.back().id).second) throw ValidationError("model '" + c.models.back().id + "' declared twice");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.environment.kind == "tcp" && !c.tasks_file) throw ValidationError("a tcp environment needs tasks_file");
  if (c.environment.kind == "sim" && c.tasks_file) throw ValidationError("tasks_file is only used with tcp environments");
  if (c.grid.task_ids.empty()) {
    if (c.tasks_file) {
      std::ifstream in(*c.tasks_file);
      if (!in) throw ValidationError("cannot read tasks file " + c.tasks_file->string());
      const auto registry = TaskRegistry::read_jsonl(in);
      for (const auto& t : registry.tasks()) c.grid.task_ids.push_back(t.task_id);
    } else {
      c.grid.task_ids = builtin_task_ids();
    }
  }
  c.episode.executor.mode = c.grid.mode;
  c.episode.executor.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

Harness build_harness(const ExperimentConfig& config) {
  Harness h;
  h.gateway = std::make_shared<ModelGateway>(config.retry);
  const auto world = builtin_sim_world();
  for (const auto& m : config.models) {
    if (m.kind == "sim-agent") {
      h.gateway->register_mock(sim_agent_script(world, sim_agent_profile(m.profile), m.id));
    } else {
      auto backend = std::make_shared<HttpChatBackend>(m.provider);
      h.secrets.push_back(backend->secret());
      h.gateway->register_backend(m.id, backend, m.provider.rate_limit, m.provider.base_url);
    }
  }

  if (config.environment.kind == "sim") {
    h.registry = world->registry();
    h.environments = [world] { return std::make_unique<SimEnvironment>(world); };
  } else {
    std::ifstream in(*config.tasks_file);
    if (!in) throw ValidationError("cannot read tasks file " + config.tasks_file->string());
    h.registry = TaskRegistry::read_jsonl(in);
    const auto host = config.environment.host;
    const auto port = config.environment.port;
    h.environments = [host, port]() -> std::unique_ptr<Environment> {
      return std::make_unique<RemoteEnvironment>(connect_tcp(host, port));
    };
  }
  return h;
}

}  // namespace planahead
