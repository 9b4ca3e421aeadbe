#pragma once

#include "planahead/model_gateway.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace planahead {

// Raised when a mock receives a request its script does not cover. Never
// retried and never answered with a fallback.
class MockMiss : public Error {
 public:
  using Error::Error;
};

struct MockFailure {
  bool transient = true;
  std::string detail = "scripted failure";
};

using MockOutcome = std::variant<std::string, MockFailure>;

// Matches on the request tag and, optionally, on a substring of the last user
// message. A tag pattern ending in '*' is a prefix match; an empty pattern
// matches any tag.
struct MockRule {
  std::string tag_pattern;
  std::optional<std::string> contains;
  std::vector<MockOutcome> outcomes;
  bool repeat_last = false;  // keep answering with the last outcome once exhausted
};

// Called with the request and the zero-based call index; nullopt is a miss.
using MockResponder = std::function<std::optional<MockOutcome>(const ChatRequest&, std::size_t)>;

// Rules are consulted in order; the first matching rule with outcomes left
// answers. The responder, if set, is consulted only when no rule answers.
struct MockScript {
  std::string model_id;  // empty: the gateway assigns "mock-<n>"
  std::vector<MockRule> rules;
  MockResponder responder;

  MockScript& on(std::string tag_pattern, MockOutcome outcome);
  MockScript& then(MockOutcome outcome);  // appends to the last rule
};

class MockBackend final : public ModelBackend {
 public:
  explicit MockBackend(MockScript script);

  ProviderReply send(const ChatRequest& request) override;
  std::string provider() const override { return "mock"; }
  std::size_t calls() const;

 private:
  MockScript script_;
  std::vector<std::size_t> consumed_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

bool tag_matches(std::string_view pattern, std::string_view tag);

}  // namespace planahead
