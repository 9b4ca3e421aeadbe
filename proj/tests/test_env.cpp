#include "planahead/conformance.hpp"
#include "planahead/digest.hpp"
#include "planahead/executor.hpp"
#include "planahead/line_channel.hpp"
#include "planahead/sim_env.hpp"

#include <doctest.h>
#include <json.hpp>

#include <deque>
#include <queue>
#include <random>
#include <thread>

using namespace planahead;

namespace {

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ProtocolError& e) {
    return e.code();
  }
  return "no error";
}

// Serves a fresh SimEnvironment over one end of a socket pair.
struct SocketHarness {
  std::shared_ptr<const SimWorld> world = builtin_sim_world();
  SimEnvironment server_env{world};
  std::unique_ptr<RemoteEnvironment> client;
  std::jthread server;

  SocketHarness() {
    auto [a, b] = make_socket_pair();
    client = std::make_unique<RemoteEnvironment>(std::move(a));
    server = std::jthread([this, channel = std::shared_ptr<FdLineChannel>(std::move(b))] {
      ProtocolServer(server_env).serve(*channel);
    });
  }
  ~SocketHarness() { client.reset(); }
};

}  // namespace

TEST_CASE("every message kind round trips through the wire encoding") {
  Observation o;
  o.url = "http://x";
  o.step_index = 4;
  o.axtree = "RootWebArea 'x'";
  o.html = "<html>\"quoted\" é</html>";
  o.screenshot = ImagePart{{0, 1, 2, 255, 128}, "image/png"};
  const std::vector<AdapterMessage> messages = {
      msg::Reset{"sim.newsletter"}, msg::ObservationMsg{o}, msg::Action{"click('12')"},
      msg::Result{1, true},         msg::ErrorMsg{"unknown-task", "nope"}, msg::DescribeActions{},
      msg::ActionSet{{"click(bid)", "noop()"}}};
  for (const auto& m : messages) {
    const auto line = encode_message(m);
    INFO(line);
    CHECK(line.find('\n') == std::string::npos);
    const auto j = nlohmann::json::parse(line);
    CHECK(j["v"] == 1);
    CHECK(j["kind"] == kind_of(m));
    const auto back = decode_message(line);
    CHECK(back.index() == m.index());
    CHECK(encode_message(back) == line);
  }
  const auto obs = std::get<msg::ObservationMsg>(decode_message(encode_message(msg::ObservationMsg{o})));
  CHECK(obs.observation == o);
}

TEST_CASE("malformed lines raise typed protocol errors") {
  CHECK(code_of([] { decode_message("{not json"); }) == "bad-message");
  CHECK(code_of([] { decode_message("[1,2]"); }) == "bad-message");
  CHECK(code_of([] { decode_message(R"({"v":1})"); }) == "bad-message");
  CHECK(code_of([] { decode_message(R"({"v":2,"kind":"reset","task_id":"x"})"); }) == "bad-version");
  CHECK(code_of([] { decode_message(R"({"kind":"reset","task_id":"x"})"); }) == "bad-message");
  CHECK(code_of([] { decode_message(R"({"v":1,"kind":"teleport"})"); }) == "bad-message");
  CHECK(code_of([] { decode_message(R"({"v":1,"kind":"result","reward":2,"done":true})"); }) == "bad-message");
  CHECK(code_of([] { decode_message(R"({"v":1,"kind":"observation","observation":{"step_index":0}})"); }) ==
        "bad-message");
  CHECK(code_of([] {
          decode_message(
              R"({"v":1,"kind":"observation","observation":{"step_index":0,"screenshot":{"media_type":"image/png","data":"!!"}}})");
        }) == "bad-message");
}

TEST_CASE("action membership checks the name and argument list") {
  const auto templates = SimWorld::default_action_templates();
  CHECK(action_in_set("click('12')", templates));
  CHECK(action_in_set("  fill('3', 'a, b')  ", templates));
  CHECK(action_in_set("noop()", templates));
  CHECK_FALSE(action_in_set("dance()", templates));
  CHECK_FALSE(action_in_set("click('1') and more", templates));
  CHECK_FALSE(action_in_set("", templates));
  CHECK(action_name(" scroll(0, 300)") == "scroll");
  CHECK(normalize_action("  fill('1',   'a  b') ") == "fill('1', 'a b')");
}

TEST_CASE("sim reset returns the initial page deterministically") {
  SimEnvironment env(builtin_sim_world());
  const auto first = env.reset("sim.contact_form");
  CHECK(first.step_index == 0);
  REQUIRE(first.html);
  CHECK(first.html->find("Contact Us") != std::string::npos);
  CHECK(first.axtree.has_value());
  CHECK(first.screenshot.has_value());
  CHECK(env.reset("sim.contact_form") == first);
  CHECK(code_of([&] { env.reset("sim.nope"); }) == "unknown-task");
}

TEST_CASE("sim protocol state machine") {
  SimEnvironment env(builtin_sim_world());
  CHECK(code_of([&] { env.step("noop()"); }) == "no-episode");
  env.reset("sim.contact_form");
  const auto wrong = env.step("click('99')");
  CHECK(wrong.reward == 0);
  CHECK_FALSE(wrong.done);
  CHECK(wrong.observation.step_index == 1);
  const auto a = env.step("fill('14', 'Where is my order?')");
  CHECK(a.reward == 0);
  CHECK_FALSE(a.done);
  const auto b = env.step("click('15')");
  CHECK(b.reward == 1);
  CHECK(b.done);
  CHECK(code_of([&] { env.step("noop()"); }) == "episode-done");
  CHECK_FALSE(env.describe_actions().empty());
}

TEST_CASE("thirty wrong actions never finish a sim task") {
  SimEnvironment env(builtin_sim_world());
  const auto start = env.reset("sim.reduce_price");
  for (int i = 0; i < 30; ++i) {
    const auto r = env.step("noop()");
    CHECK(r.reward == 0);
    CHECK_FALSE(r.done);
    CHECK(r.observation.html == start.html);
  }
}

TEST_CASE("an empty action set is rejected") {
  CHECK_THROWS_AS(SimWorld(builtin_sim_tasks(), {}), ValidationError);
}

TEST_CASE("malformed scripts are rejected") {
  auto script = builtin_sim_tasks().front();
  script.accepting.clear();
  CHECK_THROWS_AS(validate_script(script), ValidationError);
  script = builtin_sim_tasks().front();
  script.accepting.insert(script.initial);
  CHECK_THROWS_AS(validate_script(script), ValidationError);
}

TEST_CASE("property: reward 1 exactly when an accepting state is entered") {
  // Exhaustive BFS over every state reachable in each script, stepping the
  // environment along a path to that state and then trying every scripted
  // action plus a few unscripted ones.
  const auto world = builtin_sim_world();
  for (const auto& script : world->scripts()) {
    INFO(script.task_id);
    std::map<std::string, std::vector<std::string>> path_to{{script.initial, {}}};
    std::deque<std::string> queue{script.initial};
    std::set<std::string> actions{"noop()", "click('999')", "scroll(0, 300)"};
    for (const auto& [key, to] : script.transitions) actions.insert(key.second);
    while (!queue.empty()) {
      const auto state = queue.front();
      queue.pop_front();
      if (script.accepting.count(state)) continue;
      for (const auto& action : actions) {
        SimEnvironment env(world);
        env.reset(script.task_id);
        for (const auto& a : path_to[state]) env.step(a);
        REQUIRE(env.current_state() == state);
        const auto r = env.step(action);
        const auto it = script.transitions.find({state, action});
        const auto expected = it == script.transitions.end() ? state : it->second;
        CHECK(env.current_state() == expected);
        CHECK(r.reward == (script.accepting.count(expected) ? 1 : 0));
        CHECK(r.done == (r.reward == 1));
        CHECK(r.observation.html == script.observation_of.at(expected).html);
        if (!path_to.count(expected)) {
          auto p = path_to[state];
          p.push_back(action);
          path_to[expected] = p;
          queue.push_back(expected);
        }
      }
    }
    CHECK(path_to.size() == script.states.size());
    const auto solution = shortest_solution(script, script.initial);
    REQUIRE_FALSE(solution.empty());
    SimEnvironment env(world);
    env.reset(script.task_id);
    for (std::size_t i = 0; i < solution.size(); ++i) {
      const auto r = env.step(solution[i]);
      CHECK(r.reward == (i + 1 == solution.size() ? 1 : 0));
    }
  }
}

TEST_CASE("property: identical action sequences give identical observations") {
  const auto world = builtin_sim_world();
  std::mt19937_64 rng(41);
  for (const auto& script : world->scripts()) {
    std::vector<std::string> actions{"noop()"};
    for (const auto& [key, to] : script.transitions) actions.push_back(key.second);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::string> seq;
      for (int i = 0; i < 8; ++i) seq.push_back(actions[rng() % actions.size()]);
      auto play = [&] {
        SimEnvironment env(world);
        std::vector<std::string> out{observation_digest(env.reset(script.task_id))};
        for (const auto& a : seq) {
          const auto r = env.step(a);
          out.push_back(std::to_string(r.reward) + sha256_hex(r.observation.html.value_or("")));
          if (r.done) break;
        }
        return out;
      };
      CHECK(play() == play());
    }
  }
}

TEST_CASE("builtin world has ten sim tasks plus the loopback task") {
  const auto world = builtin_sim_world();
  CHECK(world->scripts().size() == 11);
  CHECK(world->find(kLoopbackTaskId) != nullptr);
  const auto registry = world->registry();
  CHECK(registry.size() == 11);
  CHECK(registry.at("sim.bruxism").goal == "Buy something to alleviate sleep bruxism");
}

TEST_CASE("in-process sim passes conformance") {
  SimEnvironment env(builtin_sim_world());
  const auto report = run_conformance(env);
  INFO(report.summary());
  CHECK(report.passed());
  CHECK(report.checks.size() >= 8);
}

TEST_CASE("sim served over a socket pair passes wire conformance with the same transcript") {
  SimEnvironment local(builtin_sim_world());
  const auto in_process = run_conformance(local);

  SocketHarness h;
  const auto remote = run_conformance(*h.client);
  INFO(remote.summary());
  CHECK(remote.passed());
  CHECK(remote.transcript == in_process.transcript);

  SocketHarness h2;
  const auto wire = run_wire_conformance(*h2.client);
  INFO(wire.summary());
  CHECK(wire.passed());
  CHECK(wire.checks.size() > remote.checks.size());
}

TEST_CASE("sim served over tcp passes wire conformance") {
  TcpListener listener("127.0.0.1", 0);
  SimEnvironment server_env(builtin_sim_world());
  std::jthread server([&] {
    auto channel = listener.accept();
    ProtocolServer(server_env).serve(*channel);
  });
  RemoteEnvironment client(connect_tcp("127.0.0.1", listener.port()));
  const auto report = run_wire_conformance(client);
  INFO(report.summary());
  CHECK(report.passed());
}

TEST_CASE("conformance catches an environment that breaks the self-loop rule") {
  // Wraps the sim and rewards any action, which a conforming env never does.
  struct Cheater final : Environment {
    SimEnvironment inner{builtin_sim_world()};
    Observation reset(const std::string& id) override { return inner.reset(id); }
    StepResult step(const std::string& a) override {
      auto r = inner.step(a);
      r.reward = 1;
      return r;
    }
    std::vector<std::string> describe_actions() override { return inner.describe_actions(); }
  } env;
  CHECK_FALSE(run_conformance(env).passed());
}

TEST_CASE("protocol server answers errors and keeps going") {
  SimEnvironment env(builtin_sim_world());
  ProtocolServer server(env);
  auto first_kind = [](const std::vector<std::string>& lines) {
    return nlohmann::json::parse(lines.at(0))["kind"].get<std::string>();
  };
  auto first_code = [](const std::vector<std::string>& lines) {
    return nlohmann::json::parse(lines.at(0))["code"].get<std::string>();
  };
  CHECK(first_code(server.handle("garbage")) == "bad-message");
  CHECK(first_code(server.handle(encode_message(msg::Action{"noop()"}))) == "no-episode");
  CHECK(first_code(server.handle(encode_message(msg::Result{0, false}))) == "unexpected-kind");
  CHECK(first_kind(server.handle(encode_message(msg::Reset{"loopback.echo"}))) == "observation");
  const auto step = server.handle(encode_message(msg::Action{"noop()"}));
  REQUIRE(step.size() == 2);
  CHECK(first_kind(step) == "observation");
  CHECK(nlohmann::json::parse(step[1])["kind"] == "result");
  CHECK(first_kind(server.handle(encode_message(msg::DescribeActions{}))) == "action_set");
}

TEST_CASE("remote environment surfaces server error codes") {
  SocketHarness h;
  CHECK(code_of([&] { h.client->step("noop()"); }) == "no-episode");
  CHECK(code_of([&] { h.client->reset("nope"); }) == "unknown-task");
  const auto o = h.client->reset("sim.contact_form");
  REQUIRE(o.screenshot);
  CHECK(*o.screenshot == *SimEnvironment(builtin_sim_world()).reset("sim.contact_form").screenshot);
  CHECK(h.client->describe_actions() == SimWorld::default_action_templates());
}

TEST_CASE("base64 round trip") {
  std::mt19937_64 rng(42);
  for (int len = 0; len < 40; ++len) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}) == "Zm9vYg==");
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ValidationError);
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
