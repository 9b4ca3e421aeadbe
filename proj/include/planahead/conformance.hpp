#pragma once

#include "planahead/env_protocol.hpp"

#include <string>
#include <vector>

namespace planahead {

// A task the environment under test must host, with a known solution.
struct ConformanceCase {
  std::string task_id = "loopback.echo";
  std::vector<std::string> solution = {"fill('1', 'ping')", "click('2')"};
  std::string wrong_action = "click('999')";
  std::string unknown_task_id = "no-such-task";
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ConformanceCheck> checks;
  // Message kinds in exchange order, e.g. "> reset", "< observation",
  // "< error:no-episode". Equal transcripts mean equal protocol behaviour.
  std::vector<std::string> transcript;

  bool passed() const;
  std::string summary() const;
};

// Drives a fresh environment (no episode started yet) through the protocol
// state machine: ordering errors, unknown tasks, determinism of reset, the
// self-loop rule and the reward on the known solution.
ConformanceReport run_conformance(Environment& env, const ConformanceCase& c = {});

// run_conformance plus checks only visible on the wire: malformed JSON,
// unsupported versions, client-sent server kinds and base64 screenshots.
ConformanceReport run_wire_conformance(RemoteEnvironment& env, const ConformanceCase& c = {});

}  // namespace planahead
