#include "planahead/env_protocol.hpp"

#include "planahead/digest.hpp"
#include "planahead/line_channel.hpp"

#include <json.hpp>

#include <cctype>

namespace planahead {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void bad_message(const std::string& detail) {
  throw ProtocolError(std::string(protocol_code::kBadMessage), detail);
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) bad_message(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) bad_message(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) bad_message(std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

json observation_to_json(const Observation& o) {
  json j = {{"url", o.url}, {"step_index", o.step_index}};
  if (o.screenshot) {
    j["screenshot"] = {{"media_type", o.screenshot->media_type}, {"data", base64_encode(o.screenshot->bytes)}};
  }
  if (o.axtree) j["axtree"] = *o.axtree;
  if (o.html) j["html"] = *o.html;
  return j;
}

Observation observation_from_json(const json& j) {
  if (!j.is_object()) bad_message("observation must be an object");
  Observation o;
  o.url = optional_string(j, "url").value_or("");
  const auto& step = field(j, "step_index");
  if (!step.is_number_unsigned()) bad_message("step_index must be a non-negative integer");
  o.step_index = step.get<std::size_t>();
  if (auto it = j.find("screenshot"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) bad_message("screenshot must be an object");
    ImagePart image;
    image.media_type = string_field(*it, "media_type");
    try {
      image.bytes = base64_decode(string_field(*it, "data"));
    } catch (const ValidationError& e) {
      bad_message(std::string("screenshot payload: ") + e.what());
    }
    o.screenshot = std::move(image);
  }
  o.axtree = optional_string(j, "axtree");
  o.html = optional_string(j, "html");
  validate_observation(o);
  return o;
}

}  // namespace

void validate_observation(const Observation& o) {
  if (!o.screenshot && !o.axtree && !o.html) bad_message("observation carries none of screenshot/axtree/html");
}

std::string_view kind_of(const AdapterMessage& message) {
  return std::visit(overloaded{
                        [](const msg::Reset&) { return std::string_view("reset"); },
                        [](const msg::ObservationMsg&) { return std::string_view("observation"); },
                        [](const msg::Action&) { return std::string_view("action"); },
                        [](const msg::Result&) { return std::string_view("result"); },
                        [](const msg::ErrorMsg&) { return std::string_view("error"); },
                        [](const msg::DescribeActions&) { return std::string_view("describe_actions"); },
                        [](const msg::ActionSet&) { return std::string_view("action_set"); },
                    },
                    message);
}

std::string encode_message(const AdapterMessage& message) {
  json j = {{"v", kProtocolVersion}, {"kind", kind_of(message)}};
  std::visit(overloaded{
                 [&](const msg::Reset& m) { j["task_id"] = m.task_id; },
                 [&](const msg::ObservationMsg& m) { j["observation"] = observation_to_json(m.observation); },
                 [&](const msg::Action& m) { j["action"] = m.action; },
                 [&](const msg::Result& m) {
                   j["reward"] = m.reward;
                   j["done"] = m.done;
                 },
                 [&](const msg::ErrorMsg& m) {
                   j["code"] = m.code;
                   j["detail"] = m.detail;
                 },
                 [](const msg::DescribeActions&) {},
                 [&](const msg::ActionSet& m) { j["actions"] = m.actions; },
             },
             message);
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

AdapterMessage decode_message(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    bad_message(std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) bad_message("message must be a JSON object");
  const auto& v = field(j, "v");
  if (!v.is_number_integer()) bad_message("field 'v' must be an integer");
  if (v.get<int>() != kProtocolVersion) {
    throw ProtocolError(std::string(protocol_code::kBadVersion), "unsupported protocol version " + v.dump());
  }
  const std::string kind = string_field(j, "kind");
  if (kind == "reset") return msg::Reset{string_field(j, "task_id")};
  if (kind == "observation") return msg::ObservationMsg{observation_from_json(field(j, "observation"))};
  if (kind == "action") return msg::Action{string_field(j, "action")};
  if (kind == "result") {
    const auto& reward = field(j, "reward");
    const auto& done = field(j, "done");
    if (!reward.is_number_integer() || (reward.get<int>() != 0 && reward.get<int>() != 1)) {
      bad_message("reward must be 0 or 1");
    }
    if (!done.is_boolean()) bad_message("done must be a boolean");
    return msg::Result{reward.get<int>(), done.get<bool>()};
  }
  if (kind == "error") return msg::ErrorMsg{string_field(j, "code"), optional_string(j, "detail").value_or("")};
  if (kind == "describe_actions") return msg::DescribeActions{};
  if (kind == "action_set") {
    const auto& actions = field(j, "actions");
    if (!actions.is_array()) bad_message("actions must be an array");
    msg::ActionSet set;
    for (const auto& a : actions) {
      if (!a.is_string()) bad_message("actions must be strings");
      set.actions.push_back(a.get<std::string>());
    }
    return set;
  }
  bad_message("unknown kind '" + kind + "'");
}

std::string action_name(std::string_view action) {
  std::size_t begin = 0;
  while (begin < action.size() && std::isspace(static_cast<unsigned char>(action[begin]))) ++begin;
  std::size_t end = begin;
  while (end < action.size() && (std::isalnum(static_cast<unsigned char>(action[end])) || action[end] == '_')) ++end;
  return std::string(action.substr(begin, end - begin));
}

bool action_in_set(std::string_view action, const std::vector<std::string>& templates) {
  constexpr std::string_view kSpace = " \t\r\n";
  const auto first = action.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return false;
  const auto body = action.substr(first, action.find_last_not_of(kSpace) - first + 1);
  const auto name = action_name(body);
  if (name.empty()) return false;
  // Anything after the name must be a parenthesised argument list.
  const auto rest = body.substr(name.size());
  const auto paren = rest.find_first_not_of(kSpace);
  if (paren != std::string_view::npos && (rest[paren] != '(' || rest.back() != ')')) return false;
  for (const auto& t : templates) {
    if (action_name(t) == name) return true;
  }
  return false;
}

// ---- server ---------------------------------------------------------------

ProtocolServer::ProtocolServer(Environment& env) : env_(env) {}

std::vector<std::string> ProtocolServer::handle(std::string_view line) {
  auto error = [](std::string code, std::string detail) {
    return std::vector<std::string>{encode_message(msg::ErrorMsg{std::move(code), std::move(detail)})};
  };
  try {
    const AdapterMessage message = decode_message(line);
    if (const auto* reset = std::get_if<msg::Reset>(&message)) {
      return {encode_message(msg::ObservationMsg{env_.reset(reset->task_id)})};
    }
    if (const auto* action = std::get_if<msg::Action>(&message)) {
      auto result = env_.step(action->action);
      return {encode_message(msg::ObservationMsg{std::move(result.observation)}),
              encode_message(msg::Result{result.reward, result.done})};
    }
    if (std::holds_alternative<msg::DescribeActions>(message)) {
      auto actions = env_.describe_actions();
      if (actions.empty()) return error(std::string(protocol_code::kEnvError), "environment declares no actions");
      return {encode_message(msg::ActionSet{std::move(actions)})};
    }
    return error(std::string(protocol_code::kUnexpectedKind),
                 "clients may not send '" + std::string(kind_of(message)) + "' messages");
  } catch (const ProtocolError& e) {
    return error(e.code(), e.detail());
  } catch (const std::exception& e) {
    return error(std::string(protocol_code::kEnvError), e.what());
  }
}

void ProtocolServer::serve(LineChannel& channel) {
  while (auto line = channel.read_line()) {
    if (line->empty()) continue;
    for (const auto& reply : handle(*line)) channel.write_line(reply);
  }
}

// ---- client ---------------------------------------------------------------

RemoteEnvironment::RemoteEnvironment(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {}

RemoteEnvironment::~RemoteEnvironment() = default;

AdapterMessage RemoteEnvironment::receive() {
  auto line = channel_->read_line();
  if (!line) throw ProtocolError(std::string(protocol_code::kTransport), "connection closed by environment");
  auto message = decode_message(*line);
  if (const auto* error = std::get_if<msg::ErrorMsg>(&message)) throw ProtocolError(error->code, error->detail);
  return message;
}

AdapterMessage RemoteEnvironment::send(const AdapterMessage& message) {
  channel_->write_line(encode_message(message));
  return receive();
}

AdapterMessage RemoteEnvironment::exchange_raw(std::string_view line) {
  channel_->write_line(line);
  auto reply = channel_->read_line();
  if (!reply) throw ProtocolError(std::string(protocol_code::kTransport), "connection closed by environment");
  return decode_message(*reply);
}

Observation RemoteEnvironment::reset(const std::string& task_id) {
  auto reply = send(msg::Reset{task_id});
  if (auto* obs = std::get_if<msg::ObservationMsg>(&reply)) return std::move(obs->observation);
  throw ProtocolError(std::string(protocol_code::kUnexpectedKind),
                      "expected observation after reset, got " + std::string(kind_of(reply)));
}

StepResult RemoteEnvironment::step(const std::string& action) {
  auto first = send(msg::Action{action});
  auto* obs = std::get_if<msg::ObservationMsg>(&first);
  if (obs == nullptr) {
    throw ProtocolError(std::string(protocol_code::kUnexpectedKind),
                        "expected observation after action, got " + std::string(kind_of(first)));
  }
  auto second = receive();
  const auto* result = std::get_if<msg::Result>(&second);
  if (result == nullptr) {
    throw ProtocolError(std::string(protocol_code::kUnexpectedKind),
                        "expected result after observation, got " + std::string(kind_of(second)));
  }
  return StepResult{std::move(obs->observation), result->reward, result->done};
}

std::vector<std::string> RemoteEnvironment::describe_actions() {
  auto reply = send(msg::DescribeActions{});
  auto* set = std::get_if<msg::ActionSet>(&reply);
  if (set == nullptr) {
    throw ProtocolError(std::string(protocol_code::kUnexpectedKind),
                        "expected action_set, got " + std::string(kind_of(reply)));
  }
  if (set->actions.empty()) throw ProtocolError(std::string(protocol_code::kEnvError), "empty action set");
  return std::move(set->actions);
}

}  // namespace planahead
