#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "planahead/http_backend.hpp"

#include "planahead/digest.hpp"

#include <httplib.h>

#include <cstdlib>

namespace planahead {

namespace {

std::string data_url(const ImagePart& image) {
  return "data:" + image.media_type + ";base64," + base64_encode(image.bytes);
}

}  // namespace

WireFormat parse_wire_format(std::string_view name) {
  if (name == "openai") return WireFormat::OpenAiChat;
  if (name == "gemini") return WireFormat::Gemini;
  throw ConfigError("unknown provider wire format '" + std::string(name) + "' (expected openai or gemini)");
}

nlohmann::json to_openai_request(const ChatRequest& request, const std::string& remote_model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& message : request.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : message.parts) {
      if (const auto* text = std::get_if<std::string>(&part)) {
        content.push_back({{"type", "text"}, {"text", *text}});
      } else {
        const auto& image = std::get<ImagePart>(part);
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(image)}}}});
      }
    }
    messages.push_back({{"role", to_string(message.role)}, {"content", std::move(content)}});
  }
  nlohmann::json body = {
      {"model", remote_model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ProviderReply parse_openai_response(const nlohmann::json& body) {
  try {
    ProviderReply reply;
    const auto& message = body.at("choices").at(0).at("message");
    const auto& content = message.at("content");
    if (content.is_string()) {
      reply.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") reply.text += part.at("text").get<std::string>();
      }
    }
    if (body.contains("usage") && body["usage"].is_object()) {
      reply.usage.input_tokens = body["usage"].value("prompt_tokens", 0ULL);
      reply.usage.output_tokens = body["usage"].value("completion_tokens", 0ULL);
    }
    return reply;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed chat-completions response: ") + e.what());
  }
}

nlohmann::json to_gemini_request(const ChatRequest& request) {
  nlohmann::json contents = nlohmann::json::array();
  nlohmann::json system_parts = nlohmann::json::array();
  for (const auto& message : request.messages) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& part : message.parts) {
      if (const auto* text = std::get_if<std::string>(&part)) {
        parts.push_back({{"text", *text}});
      } else {
        const auto& image = std::get<ImagePart>(part);
        parts.push_back({{"inline_data", {{"mime_type", image.media_type}, {"data", base64_encode(image.bytes)}}}});
      }
    }
    if (message.role == Role::System) {
      for (auto& p : parts) system_parts.push_back(std::move(p));
    } else {
      contents.push_back({{"role", message.role == Role::Assistant ? "model" : "user"}, {"parts", std::move(parts)}});
    }
  }
  nlohmann::json body = {
      {"contents", std::move(contents)},
      {"generationConfig", {{"temperature", request.temperature}, {"maxOutputTokens", request.max_output_tokens}}},
  };
  if (request.seed) body["generationConfig"]["seed"] = *request.seed;
  if (!system_parts.empty()) body["systemInstruction"] = {{"parts", std::move(system_parts)}};
  return body;
}

ProviderReply parse_gemini_response(const nlohmann::json& body) {
  try {
    ProviderReply reply;
    for (const auto& part : body.at("candidates").at(0).at("content").at("parts")) {
      if (part.contains("text")) reply.text += part["text"].get<std::string>();
    }
    if (body.contains("usageMetadata")) {
      reply.usage.input_tokens = body["usageMetadata"].value("promptTokenCount", 0ULL);
      reply.usage.output_tokens = body["usageMetadata"].value("candidatesTokenCount", 0ULL);
    }
    return reply;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed generateContent response: ") + e.what());
  }
}

void check_http_status(int status, const std::string& body) {
  if (status >= 200 && status < 300) return;
  const std::string detail = "HTTP " + std::to_string(status) + ": " + body.substr(0, 512);
  if (status == 429 || status >= 500) throw TransientError(detail);
  throw ProviderError(detail, status);
}

HttpChatBackend::HttpChatBackend(ProviderConfig config) : config_(std::move(config)) {
  if (config_.remote_model.empty()) config_.remote_model = config_.model_id;
  if (config_.base_url.empty()) {
    config_.base_url = config_.format == WireFormat::Gemini ? "https://generativelanguage.googleapis.com/v1beta"
                                                            : "https://api.openai.com/v1";
  }
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env + " is not set (model " + config_.model_id + ")");
    }
    api_key_ = key;
  }
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + config_.base_url);
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatBackend::provider() const {
  return config_.format == WireFormat::Gemini ? "gemini:" + origin_ : "openai:" + origin_;
}

ProviderReply HttpChatBackend::send(const ChatRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  std::string path;
  nlohmann::json body;
  if (config_.format == WireFormat::Gemini) {
    path = path_prefix_ + "/models/" + config_.remote_model + ":generateContent";
    body = to_gemini_request(request);
    if (!api_key_.empty()) headers.emplace("x-goog-api-key", api_key_);
  } else {
    path = path_prefix_ + "/chat/completions";
    body = to_openai_request(request, config_.remote_model);
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  }

  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) throw TransientError("transport error: " + httplib::to_string(result.error()));
  check_http_status(result->status, result->body);

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("response is not JSON: ") + e.what(), result->status);
  }
  return config_.format == WireFormat::Gemini ? parse_gemini_response(parsed) : parse_openai_response(parsed);
}

}  // namespace planahead
