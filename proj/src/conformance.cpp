#include "planahead/conformance.hpp"

#include "planahead/digest.hpp"

#include <functional>

namespace planahead {

namespace {

class Probe {
 public:
  Probe(ConformanceReport& report) : report_(report) {}

  void check(std::string name, bool passed, std::string detail = {}) {
    report_.checks.push_back({std::move(name), passed, std::move(detail)});
  }

  void log(std::string entry) { report_.transcript.push_back(std::move(entry)); }

  // Runs `body`; a ProtocolError with `code` passes, anything else fails.
  void expect_error(const std::string& name, const std::string& sent, std::string_view code,
                    const std::function<void()>& body) {
    log("> " + sent);
    try {
      body();
      log("< (no error)");
      check(name, false, "expected error '" + std::string(code) + "', got a normal reply");
    } catch (const ProtocolError& e) {
      log("< error:" + e.code());
      check(name, e.code() == code, "got '" + e.code() + "': " + e.detail());
    }
  }

  std::optional<Observation> reset(Environment& env, const std::string& task) {
    log("> reset");
    try {
      auto o = env.reset(task);
      log("< observation");
      return o;
    } catch (const ProtocolError& e) {
      log("< error:" + e.code());
      check("reset " + task, false, e.what());
      return std::nullopt;
    }
  }

  std::optional<StepResult> step(Environment& env, const std::string& action) {
    log("> action");
    try {
      auto r = env.step(action);
      log("< observation");
      log("< result reward=" + std::to_string(r.reward) + (r.done ? " done" : ""));
      return r;
    } catch (const ProtocolError& e) {
      log("< error:" + e.code());
      check("step " + action, false, e.what());
      return std::nullopt;
    }
  }

 private:
  ConformanceReport& report_;
};

Observation without_step(Observation o) {
  o.step_index = 0;
  return o;
}

}  // namespace

bool ConformanceReport::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string ConformanceReport::summary() const {
  std::string out;
  for (const auto& c : checks) {
    out += (c.passed ? "PASS " : "FAIL ") + c.name;
    if (!c.passed && !c.detail.empty()) out += " (" + c.detail + ")";
    out += "\n";
  }
  return out;
}

ConformanceReport run_conformance(Environment& env, const ConformanceCase& c) {
  ConformanceReport report;
  Probe probe(report);
  if (c.solution.empty()) throw ValidationError("conformance case needs a solution");

  probe.expect_error("action before reset is no-episode", "action", protocol_code::kNoEpisode,
                     [&] { env.step(c.solution.front()); });

  probe.log("> describe_actions");
  try {
    const auto actions = env.describe_actions();
    probe.log("< action_set");
    probe.check("describe_actions is non-empty", !actions.empty());
    bool covers = true;
    for (const auto& a : c.solution) covers = covers && action_in_set(a, actions);
    probe.check("action set covers the known solution", covers);
  } catch (const ProtocolError& e) {
    probe.log("< error:" + e.code());
    probe.check("describe_actions is non-empty", false, e.what());
  }

  probe.expect_error("unknown task is unknown-task", "reset", protocol_code::kUnknownTask,
                     [&] { env.reset(c.unknown_task_id); });

  const auto first = probe.reset(env, c.task_id);
  if (!first) return report;
  probe.check("reset starts at step 0", first->step_index == 0);
  probe.check("observation carries a field", first->screenshot || first->axtree || first->html);
  const auto second = probe.reset(env, c.task_id);
  if (!second) return report;
  probe.check("reset twice gives identical observations", *first == *second);

  const auto wrong = probe.step(env, c.wrong_action);
  if (!wrong) return report;
  probe.check("wrong action yields reward 0 and not done", wrong->reward == 0 && !wrong->done);
  probe.check("wrong action keeps the page", without_step(wrong->observation) == without_step(*first));
  probe.check("step index advances", wrong->observation.step_index == 1);

  const auto again = probe.reset(env, c.task_id);
  if (!again) return report;
  bool rewards_ok = true;
  for (std::size_t i = 0; i < c.solution.size(); ++i) {
    const auto r = probe.step(env, c.solution[i]);
    if (!r) return report;
    const bool last = i + 1 == c.solution.size();
    rewards_ok = rewards_ok && r->reward == (last ? 1 : 0) && r->done == last;
  }
  probe.check("known solution earns reward 1 on its last step only", rewards_ok);

  probe.expect_error("action after done is episode-done", "action", protocol_code::kEpisodeDone,
                     [&] { env.step(c.solution.front()); });

  const auto fresh = probe.reset(env, c.task_id);
  if (fresh) probe.check("reset after done starts a new episode", *fresh == *first);
  return report;
}

ConformanceReport run_wire_conformance(RemoteEnvironment& env, const ConformanceCase& c) {
  ConformanceReport report = run_conformance(env, c);
  Probe probe(report);

  auto expect_raw_error = [&](const std::string& name, const std::string& line, std::string_view code) {
    probe.log("> raw");
    try {
      const auto reply = env.exchange_raw(line);
      const auto* error = std::get_if<msg::ErrorMsg>(&reply);
      probe.log(error ? "< error:" + error->code : "< " + std::string(kind_of(reply)));
      probe.check(name, error && error->code == code, error ? error->detail : "no error reply");
    } catch (const ProtocolError& e) {
      probe.log("< unreadable");
      probe.check(name, false, e.what());
    }
  };

  expect_raw_error("malformed JSON is bad-message", "{not json", protocol_code::kBadMessage);
  expect_raw_error("missing kind is bad-message", R"({"v":1})", protocol_code::kBadMessage);
  expect_raw_error("version 2 is bad-version", R"({"v":2,"kind":"describe_actions"})", protocol_code::kBadVersion);
  expect_raw_error("client-sent result is unexpected-kind", R"({"v":1,"kind":"result","reward":1,"done":true})",
                   protocol_code::kUnexpectedKind);

  probe.log("> describe_actions");
  try {
    env.describe_actions();
    probe.log("< action_set");
    probe.check("connection survives bad input", true);
  } catch (const ProtocolError& e) {
    probe.log("< error:" + e.code());
    probe.check("connection survives bad input", false, e.what());
  }

  const auto obs = probe.reset(env, c.task_id);
  if (obs) {
    const bool has_image = obs->screenshot && !obs->screenshot->empty();
    probe.check("reset observation carries a screenshot", has_image);
    if (has_image) {
      const auto encoded = base64_encode(obs->screenshot->bytes);
      const auto line = encode_message(msg::ObservationMsg{*obs});
      const auto decoded = decode_message(line);
      const auto* back = std::get_if<msg::ObservationMsg>(&decoded);
      probe.check("screenshot base64 payload round-trips",
                  back && back->observation == *obs && base64_decode(encoded) == obs->screenshot->bytes &&
                      !obs->screenshot->media_type.empty());
    }
  }
  return report;
}

}  // namespace planahead
