#pragma once

#include "planahead/error.hpp"
#include "planahead/media.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace planahead {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

using MessagePart = std::variant<std::string, ImagePart>;

struct ChatMessage {
  Role role = Role::User;
  std::vector<MessagePart> parts;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_output_tokens = 1024;
  std::string request_tag;
  // Forwarded to providers that accept a sampling seed; mocks may use it to
  // vary their behaviour per run.
  std::optional<std::uint64_t> seed;
};

// Text of every text part of the last message with the given role.
std::string last_text(const ChatRequest& request, Role role = Role::User);

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& other) {
    input_tokens += other.input_tokens;
    output_tokens += other.output_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  std::chrono::milliseconds provider_latency{0};
  std::size_t attempt_count = 1;
};

// ---- failures -------------------------------------------------------------

// Retryable: transport error, HTTP 429 or 5xx.
class TransientError : public Error {
 public:
  using Error::Error;
};

// Non-retryable provider answer (4xx other than 429, malformed body ...).
class ProviderError : public Error {
 public:
  ProviderError(std::string message, int status = 0) : Error(std::move(message)), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class TransportExhausted : public Error {
 public:
  TransportExhausted(std::string message, std::size_t attempts) : Error(std::move(message)), attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

// Unknown model id, missing credential and similar setup mistakes.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---- time -----------------------------------------------------------------

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point deadline) = 0;
  void sleep_for(duration d) { sleep_until(now() + d); }
};

class SteadyClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point deadline) override;
};

// Time only moves when somebody sleeps. Thread-safe.
class VirtualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point deadline) override;
  std::size_t sleep_calls() const;

 private:
  mutable std::mutex mu_;
  time_point now_{};
  std::size_t sleeps_ = 0;
};

// Sliding-window limiter: at most `max_requests` grants within any window of
// length `interval`.
class RateLimiter {
 public:
  RateLimiter(std::size_t max_requests, Clock::duration interval, Clock& clock);

  // Blocks (through the clock) until a grant is available; returns the grant time.
  Clock::time_point acquire();

  struct Attempt {
    bool granted = false;
    Clock::time_point retry_at{};  // earliest possible grant when not granted
  };
  Attempt try_acquire(Clock::time_point now);

 private:
  std::size_t max_requests_;
  Clock::duration interval_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> grants_;
};

// ---- request log ------------------------------------------------------------

struct AttemptRecord {
  std::string request_tag;
  std::string model_id;
  std::size_t attempt = 1;
  bool ok = false;
  std::string error;
  TokenUsage usage;
  std::int64_t latency_ms = 0;
};

class AttemptSink {
 public:
  virtual ~AttemptSink() = default;
  virtual void record(const AttemptRecord& attempt) = 0;
};

class MemoryAttemptLog final : public AttemptSink {
 public:
  void record(const AttemptRecord& attempt) override;
  std::vector<AttemptRecord> records() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<AttemptRecord> records_;
};

// Appends one JSON object per attempt. Registered secrets are replaced by
// "***" in every logged string.
class JsonlAttemptLog final : public AttemptSink {
 public:
  explicit JsonlAttemptLog(const std::string& path, std::vector<std::string> secrets = {});
  void record(const AttemptRecord& attempt) override;
  void record_block(const std::vector<AttemptRecord>& attempts);

 private:
  std::string line_for(const AttemptRecord& attempt) const;

  std::mutex mu_;
  std::ofstream out_;
  std::vector<std::string> secrets_;
};

std::string redact(std::string text, const std::vector<std::string>& secrets);

// ---- backends and gateway -------------------------------------------------

struct ProviderReply {
  std::string text;
  TokenUsage usage;
};

// One provider connection. send() throws TransientError for retryable
// failures and ProviderError (or any other Error) for the rest.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual ProviderReply send(const ChatRequest& request) = 0;
  virtual std::string provider() const = 0;
};

struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct RateLimit {
  std::size_t max_requests = 60;
  std::chrono::milliseconds interval{60000};
};

struct MockScript;

class ModelGateway final : public ChatClient {
 public:
  explicit ModelGateway(RetryPolicy retry = {}, std::shared_ptr<Clock> clock = nullptr);

  // Rate limits apply per provider key; models sharing a key share a limiter.
  void register_backend(const std::string& model_id, std::shared_ptr<ModelBackend> backend,
                        std::optional<RateLimit> limit = std::nullopt, std::string limit_key = {});
  std::string register_mock(MockScript script);

  bool has_model(std::string_view model_id) const;

  // Logs to the default sink (if any).
  ChatResponse complete(const ChatRequest& request) override;
  ChatResponse complete(const ChatRequest& request, AttemptSink* sink);

  void set_default_sink(std::shared_ptr<AttemptSink> sink);
  TokenUsage usage_for(std::string_view model_id) const;
  Clock& clock() { return *clock_; }

 private:
  struct Route {
    std::shared_ptr<ModelBackend> backend;
    std::shared_ptr<RateLimiter> limiter;
  };

  RetryPolicy retry_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, Route, std::less<>> routes_;
  std::map<std::string, std::shared_ptr<RateLimiter>, std::less<>> limiters_;
  std::map<std::string, TokenUsage, std::less<>> usage_;
  std::shared_ptr<AttemptSink> default_sink_;
  std::size_t mock_counter_ = 0;
};

// Wraps a gateway for one episode: buffers that episode's attempt records so
// they can be flushed as one contiguous block, and counts calls by tag kind.
class EpisodeClient final : public ChatClient {
 public:
  explicit EpisodeClient(ModelGateway& gateway, std::string tag_prefix = {});

  ChatResponse complete(const ChatRequest& request) override;

  const std::vector<AttemptRecord>& attempts() const { return log_.records_; }
  const TokenUsage& usage() const { return usage_; }
  std::size_t calls() const { return calls_; }

 private:
  struct Buffer final : AttemptSink {
    void record(const AttemptRecord& attempt) override { records_.push_back(attempt); }
    std::vector<AttemptRecord> records_;
  };

  ModelGateway& gateway_;
  std::string tag_prefix_;
  Buffer log_;
  TokenUsage usage_;
  std::size_t calls_ = 0;
};

}  // namespace planahead
