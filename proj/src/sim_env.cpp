#include "planahead/sim_env.hpp"

#include "planahead/digest.hpp"

#include <zlib.h>

#include <algorithm>
#include <deque>

namespace planahead {

std::string normalize_action(std::string_view action) {
  std::string out;
  bool pending_space = false;
  for (char c : action) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

void validate_script(const SimTaskScript& s) {
  const auto where = "sim task " + s.task_id + ": ";
  if (s.task_id.empty()) throw ValidationError("sim task without id");
  if (s.goal.empty()) throw ValidationError(where + "empty goal");
  const std::set<std::string> states(s.states.begin(), s.states.end());
  if (states.size() != s.states.size()) throw ValidationError(where + "duplicate state");
  if (!states.count(s.initial)) throw ValidationError(where + "initial state is not declared");
  if (s.accepting.empty()) throw ValidationError(where + "no accepting state");
  if (s.accepting.count(s.initial)) throw ValidationError(where + "initial state must not be accepting");
  for (const auto& a : s.accepting) {
    if (!states.count(a)) throw ValidationError(where + "accepting state " + a + " is not declared");
  }
  for (const auto& [key, to] : s.transitions) {
    if (!states.count(key.first) || !states.count(to)) throw ValidationError(where + "transition uses unknown state");
    if (normalize_action(key.second) != key.second) {
      throw ValidationError(where + "transition action is not normalized: '" + key.second + "'");
    }
  }
  for (const auto& state : s.states) {
    auto it = s.observation_of.find(state);
    if (it == s.observation_of.end()) throw ValidationError(where + "no observation for state " + state);
    validate_observation(it->second);
  }
  if (shortest_solution(s, s.initial).empty()) throw ValidationError(where + "no accepting state is reachable");
}

std::vector<std::string> shortest_solution(const SimTaskScript& s, const std::string& from) {
  if (s.accepting.count(from)) return {};
  std::map<std::string, std::pair<std::string, std::string>> parent;  // state -> (prev, action)
  std::deque<std::string> queue{from};
  std::set<std::string> seen{from};
  while (!queue.empty()) {
    const auto state = queue.front();
    queue.pop_front();
    // std::map orders keys, so edges leave each state in action order.
    for (auto it = s.transitions.lower_bound({state, ""}); it != s.transitions.end() && it->first.first == state;
         ++it) {
      const auto& next = it->second;
      if (!seen.insert(next).second) continue;
      parent[next] = {state, it->first.second};
      if (s.accepting.count(next)) {
        std::vector<std::string> path;
        for (std::string at = next; at != from; at = parent[at].first) path.push_back(parent[at].second);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(next);
    }
  }
  return {};
}

// ---- world ----------------------------------------------------------------

SimWorld::SimWorld(std::vector<SimTaskScript> scripts, std::vector<std::string> action_templates)
    : scripts_(std::move(scripts)), action_templates_(std::move(action_templates)) {
  if (action_templates_.empty()) throw ValidationError("sim world needs at least one action template");
  for (std::size_t i = 0; i < scripts_.size(); ++i) {
    validate_script(scripts_[i]);
    if (!by_id_.emplace(scripts_[i].task_id, i).second) {
      throw ValidationError("duplicate sim task id: " + scripts_[i].task_id);
    }
    for (const auto& state : scripts_[i].states) {
      if (!by_state_.emplace(state, i).second) throw ValidationError("state id used by two sim tasks: " + state);
    }
  }
}

std::vector<std::string> SimWorld::default_action_templates() {
  return {"click(bid)",    "fill(bid, value)", "select_option(bid, option)", "press(bid, key)",
          "scroll(dx, dy)", "goto(url)",        "noop()",                     "stop(answer)"};
}

const SimTaskScript* SimWorld::find(std::string_view task_id) const {
  auto it = by_id_.find(task_id);
  return it == by_id_.end() ? nullptr : &scripts_[it->second];
}

const SimTaskScript* SimWorld::owner_of_state(std::string_view state) const {
  auto it = by_state_.find(state);
  return it == by_state_.end() ? nullptr : &scripts_[it->second];
}

TaskRegistry SimWorld::registry() const {
  TaskRegistry registry;
  for (const auto& s : scripts_) registry.add(TaskSpec{s.task_id, s.goal, s.domain_tag, "sim"});
  return registry;
}

// ---- environment ----------------------------------------------------------

SimEnvironment::SimEnvironment(std::shared_ptr<const SimWorld> world) : world_(std::move(world)) {}

Observation SimEnvironment::observe() const {
  Observation o = task_->observation_of.at(state_);
  o.step_index = step_index_;
  return o;
}

Observation SimEnvironment::reset(const std::string& task_id) {
  const auto* task = world_->find(task_id);
  if (task == nullptr) throw ProtocolError(std::string(protocol_code::kUnknownTask), "unknown task '" + task_id + "'");
  task_ = task;
  state_ = task->initial;
  step_index_ = 0;
  done_ = false;
  return observe();
}

StepResult SimEnvironment::step(const std::string& action) {
  if (task_ == nullptr) throw ProtocolError(std::string(protocol_code::kNoEpisode), "step before reset");
  if (done_) throw ProtocolError(std::string(protocol_code::kEpisodeDone), "step after the episode ended");
  ++step_index_;
  auto it = task_->transitions.find({state_, normalize_action(action)});
  int reward = 0;
  if (it != task_->transitions.end()) {
    state_ = it->second;
    if (task_->accepting.count(state_)) {
      reward = 1;
      done_ = true;
    }
  }
  return StepResult{observe(), reward, done_};
}

std::vector<std::string> SimEnvironment::describe_actions() { return world_->action_templates(); }

// ---- placeholder screenshots ----------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = ::crc32(0L, out.data() + type_at, static_cast<uInt>(out.size() - type_at));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

ImagePart placeholder_screenshot(std::string_view seed_text) {
  constexpr std::uint32_t kSide = 8;
  const auto digest = sha256_hex(seed_text);
  const auto channel = [&](std::size_t i) {
    return static_cast<std::uint8_t>(std::stoi(digest.substr(i * 2, 2), nullptr, 16));
  };
  const std::uint8_t r = channel(0), g = channel(1), b = channel(2);

  std::vector<std::uint8_t> raw;
  for (std::uint32_t y = 0; y < kSide; ++y) {
    raw.push_back(0);  // filter: none
    for (std::uint32_t x = 0; x < kSide; ++x) {
      raw.insert(raw.end(), {r, g, b});
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  compress(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()));
  packed.resize(packed_size);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> header;
  put_u32(header, kSide);
  put_u32(header, kSide);
  header.insert(header.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
  put_chunk(png, "IHDR", header);
  put_chunk(png, "IDAT", packed);
  put_chunk(png, "IEND", {});
  return ImagePart{std::move(png), "image/png"};
}

}  // namespace planahead
