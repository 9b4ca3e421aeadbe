#include "planahead/model_gateway.hpp"

#include "planahead/mock_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace planahead {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string last_text(const ChatRequest& request, Role role) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role != role) continue;
    std::string out;
    for (const auto& part : it->parts) {
      if (const auto* text = std::get_if<std::string>(&part)) out += *text;
    }
    return out;
  }
  return {};
}

// ---- clocks ---------------------------------------------------------------

Clock::time_point SteadyClock::now() { return std::chrono::steady_clock::now(); }

void SteadyClock::sleep_until(time_point deadline) { std::this_thread::sleep_until(deadline); }

Clock::time_point VirtualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(time_point deadline) {
  std::lock_guard lock(mu_);
  ++sleeps_;
  now_ = std::max(now_, deadline);
}

std::size_t VirtualClock::sleep_calls() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

// ---- rate limiter ---------------------------------------------------------

RateLimiter::RateLimiter(std::size_t max_requests, Clock::duration interval, Clock& clock)
    : max_requests_(max_requests), interval_(interval), clock_(clock) {
  if (max_requests_ == 0) throw ConfigError("rate limit must allow at least one request");
}

RateLimiter::Attempt RateLimiter::try_acquire(Clock::time_point now) {
  std::lock_guard lock(mu_);
  while (!grants_.empty() && grants_.front() + interval_ <= now) grants_.pop_front();
  if (grants_.size() < max_requests_) {
    grants_.push_back(now);
    return {true, now};
  }
  return {false, grants_.front() + interval_};
}

Clock::time_point RateLimiter::acquire() {
  for (;;) {
    const auto now = clock_.now();
    const auto attempt = try_acquire(now);
    if (attempt.granted) return now;
    clock_.sleep_until(attempt.retry_at);
  }
}

// ---- logs -----------------------------------------------------------------

void MemoryAttemptLog::record(const AttemptRecord& attempt) {
  std::lock_guard lock(mu_);
  records_.push_back(attempt);
}

std::vector<AttemptRecord> MemoryAttemptLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

void MemoryAttemptLog::clear() {
  std::lock_guard lock(mu_);
  records_.clear();
}

std::string redact(std::string text, const std::vector<std::string>& secrets) {
  for (const auto& secret : secrets) {
    if (secret.empty()) continue;
    for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos + 3)) {
      text.replace(pos, secret.size(), "***");
    }
  }
  return text;
}

JsonlAttemptLog::JsonlAttemptLog(const std::string& path, std::vector<std::string> secrets)
    : out_(path, std::ios::app), secrets_(std::move(secrets)) {
  if (!out_) throw ConfigError("cannot open request log " + path);
}

std::string JsonlAttemptLog::line_for(const AttemptRecord& a) const {
  nlohmann::json j = {
      {"request_tag", redact(a.request_tag, secrets_)},
      {"model_id", a.model_id},
      {"attempt", a.attempt},
      {"ok", a.ok},
      {"input_tokens", a.usage.input_tokens},
      {"output_tokens", a.usage.output_tokens},
      {"latency_ms", a.latency_ms},
  };
  if (!a.error.empty()) j["error"] = redact(a.error, secrets_);
  return j.dump();
}

void JsonlAttemptLog::record(const AttemptRecord& attempt) {
  const auto line = line_for(attempt);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
}

void JsonlAttemptLog::record_block(const std::vector<AttemptRecord>& attempts) {
  std::string block;
  for (const auto& a : attempts) block += line_for(a) + '\n';
  std::lock_guard lock(mu_);
  out_ << block;
  out_.flush();
}

// ---- gateway --------------------------------------------------------------

ModelGateway::ModelGateway(RetryPolicy retry, std::shared_ptr<Clock> clock)
    : retry_(retry), clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()) {
  if (retry_.max_attempts == 0) throw ConfigError("retry policy needs at least one attempt");
}

void ModelGateway::register_backend(const std::string& model_id, std::shared_ptr<ModelBackend> backend,
                                    std::optional<RateLimit> limit, std::string limit_key) {
  if (model_id.empty()) throw ConfigError("model id must not be empty");
  std::lock_guard lock(mu_);
  Route route{std::move(backend), nullptr};
  if (limit) {
    if (limit_key.empty()) limit_key = model_id;
    auto& limiter = limiters_[limit_key];
    if (!limiter) {
      limiter = std::make_shared<RateLimiter>(limit->max_requests,
                                              std::chrono::duration_cast<Clock::duration>(limit->interval), *clock_);
    }
    route.limiter = limiter;
  }
  if (!routes_.emplace(model_id, std::move(route)).second) {
    throw ConfigError("model id registered twice: " + model_id);
  }
}

std::string ModelGateway::register_mock(MockScript script) {
  if (script.model_id.empty()) {
    std::lock_guard lock(mu_);
    script.model_id = "mock-" + std::to_string(++mock_counter_);
  }
  std::string id = script.model_id;
  register_backend(id, std::make_shared<MockBackend>(std::move(script)));
  return id;
}

bool ModelGateway::has_model(std::string_view model_id) const {
  std::lock_guard lock(mu_);
  return routes_.find(model_id) != routes_.end();
}

void ModelGateway::set_default_sink(std::shared_ptr<AttemptSink> sink) {
  std::lock_guard lock(mu_);
  default_sink_ = std::move(sink);
}

TokenUsage ModelGateway::usage_for(std::string_view model_id) const {
  std::lock_guard lock(mu_);
  auto it = usage_.find(model_id);
  return it == usage_.end() ? TokenUsage{} : it->second;
}

ChatResponse ModelGateway::complete(const ChatRequest& request) {
  std::shared_ptr<AttemptSink> sink;
  {
    std::lock_guard lock(mu_);
    sink = default_sink_;
  }
  return complete(request, sink.get());
}

ChatResponse ModelGateway::complete(const ChatRequest& request, AttemptSink* sink) {
  if (request.messages.empty()) throw ValidationError("chat request needs at least one message");
  if (!(request.temperature >= 0.0)) throw ValidationError("temperature must be >= 0");

  Route route;
  {
    std::lock_guard lock(mu_);
    auto it = routes_.find(request.model_id);
    if (it == routes_.end()) throw ConfigError("no provider configured for model '" + request.model_id + "'");
    route = it->second;
  }

  auto backoff = std::chrono::duration<double, std::milli>(retry_.initial_backoff);
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    if (route.limiter) route.limiter->acquire();
    AttemptRecord record{request.request_tag, request.model_id, attempt, false, {}, {}, 0};
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    };
    try {
      ProviderReply reply = route.backend->send(request);
      const auto latency = elapsed();
      record.ok = true;
      record.usage = reply.usage;
      record.latency_ms = latency.count();
      if (sink) sink->record(record);
      {
        std::lock_guard lock(mu_);
        usage_[request.model_id] += reply.usage;
      }
      return ChatResponse{std::move(reply.text), reply.usage, latency, attempt};
    } catch (const TransientError& e) {
      last_error = e.what();
      record.error = last_error;
      record.latency_ms = elapsed().count();
      if (sink) sink->record(record);
    } catch (const std::exception& e) {
      record.error = e.what();
      record.latency_ms = elapsed().count();
      if (sink) sink->record(record);
      throw;
    }
    if (attempt < retry_.max_attempts) {
      clock_->sleep_for(std::chrono::duration_cast<Clock::duration>(backoff));
      backoff = std::min(backoff * retry_.multiplier,
                         std::chrono::duration<double, std::milli>(retry_.max_backoff));
    }
  }
  throw TransportExhausted("model '" + request.model_id + "' failed after " + std::to_string(retry_.max_attempts) +
                               " attempts: " + last_error,
                           retry_.max_attempts);
}

// ---- per-episode client ---------------------------------------------------

EpisodeClient::EpisodeClient(ModelGateway& gateway, std::string tag_prefix)
    : gateway_(gateway), tag_prefix_(std::move(tag_prefix)) {}

ChatResponse EpisodeClient::complete(const ChatRequest& request) {
  ++calls_;
  if (tag_prefix_.empty()) {
    auto response = gateway_.complete(request, &log_);
    usage_ += response.usage;
    return response;
  }
  ChatRequest tagged = request;
  tagged.request_tag = tag_prefix_ + "/" + request.request_tag;
  auto response = gateway_.complete(tagged, &log_);
  usage_ += response.usage;
  return response;
}

}  // namespace planahead
