#include "planahead/mock_model.hpp"

namespace planahead {

bool tag_matches(std::string_view pattern, std::string_view tag) {
  if (pattern.empty()) return true;
  if (pattern.back() == '*') {
    pattern.remove_suffix(1);
    return tag.substr(0, pattern.size()) == pattern;
  }
  return pattern == tag;
}

MockScript& MockScript::on(std::string tag_pattern, MockOutcome outcome) {
  rules.push_back(MockRule{std::move(tag_pattern), std::nullopt, {std::move(outcome)}, false});
  return *this;
}

MockScript& MockScript::then(MockOutcome outcome) {
  if (rules.empty()) rules.emplace_back();
  rules.back().outcomes.push_back(std::move(outcome));
  return *this;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)), consumed_(script_.rules.size(), 0) {}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

ProviderReply MockBackend::send(const ChatRequest& request) {
  std::optional<MockOutcome> outcome;
  std::size_t call_index = 0;
  {
    std::lock_guard lock(mu_);
    call_index = calls_++;
    const std::string user_text = last_text(request);
    for (std::size_t i = 0; i < script_.rules.size() && !outcome; ++i) {
      const auto& rule = script_.rules[i];
      if (!tag_matches(rule.tag_pattern, request.request_tag)) continue;
      if (rule.contains && user_text.find(*rule.contains) == std::string::npos) continue;
      if (consumed_[i] < rule.outcomes.size()) {
        outcome = rule.outcomes[consumed_[i]++];
      } else if (rule.repeat_last && !rule.outcomes.empty()) {
        outcome = rule.outcomes.back();
      }
    }
  }
  // The responder runs outside the lock; it may be slow or re-entrant.
  if (!outcome && script_.responder) outcome = script_.responder(request, call_index);
  if (!outcome) {
    throw MockMiss("mock '" + script_.model_id + "' has no scripted answer for tag '" + request.request_tag + "'");
  }

  if (const auto* failure = std::get_if<MockFailure>(&*outcome)) {
    if (failure->transient) throw TransientError(failure->detail);
    throw ProviderError(failure->detail, 400);
  }
  const auto& text = std::get<std::string>(*outcome);
  // Rough whitespace token count so usage accounting has something to add up.
  auto count_words = [](std::string_view s) {
    std::uint64_t n = 0;
    bool in_word = false;
    for (char c : s) {
      const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
      if (!space && !in_word) ++n;
      in_word = !space;
    }
    return n;
  };
  std::uint64_t input = 0;
  for (const auto& message : request.messages) {
    for (const auto& part : message.parts) {
      if (const auto* t = std::get_if<std::string>(&part)) input += count_words(*t);
    }
  }
  return ProviderReply{text, TokenUsage{input, count_words(text)}};
}

}  // namespace planahead
