#pragma once

#include "planahead/model_gateway.hpp"

#include <json.hpp>

#include <chrono>
#include <optional>
#include <string>

namespace planahead {

// Wire shapes spoken at the provider edge. Qwen deployments and most hosted
// models accept the OpenAI chat-completions shape; Gemini also has its own.
enum class WireFormat { OpenAiChat, Gemini };

WireFormat parse_wire_format(std::string_view name);

struct ProviderConfig {
  std::string model_id;      // id used inside the harness
  WireFormat format = WireFormat::OpenAiChat;
  std::string base_url;      // e.g. https://api.openai.com/v1
  std::string remote_model;  // provider-side model name; defaults to model_id
  std::string api_key_env;   // name of the environment variable holding the key
  std::optional<RateLimit> rate_limit;
  std::chrono::seconds timeout{120};
};

nlohmann::json to_openai_request(const ChatRequest& request, const std::string& remote_model);
ProviderReply parse_openai_response(const nlohmann::json& body);

nlohmann::json to_gemini_request(const ChatRequest& request);
ProviderReply parse_gemini_response(const nlohmann::json& body);

// Throws TransientError for 429/5xx, ProviderError for other non-2xx codes.
void check_http_status(int status, const std::string& body);

class HttpChatBackend final : public ModelBackend {
 public:
  // Reads the credential from the environment; throws ConfigError if unset.
  explicit HttpChatBackend(ProviderConfig config);

  ProviderReply send(const ChatRequest& request) override;
  std::string provider() const override;
  const std::string& secret() const { return api_key_; }

 private:
  ProviderConfig config_;
  std::string api_key_;
  std::string origin_;  // scheme://host[:port]
  std::string path_prefix_;
};

}  // namespace planahead
