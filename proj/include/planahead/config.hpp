#pragma once

#include "planahead/http_backend.hpp"
#include "planahead/orchestrator.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace planahead {

struct ModelSpec {
  std::string id;
  std::string kind;     // "sim-agent", "openai" or "gemini"
  std::string profile;  // sim-agent only
  ProviderConfig provider;
};

struct EnvironmentSpec {
  std::string kind = "sim";  // "sim" or "tcp"
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct ExperimentConfig {
  ExperimentGrid grid;
  EpisodeSettings episode;
  EnvironmentSpec environment;
  std::vector<ModelSpec> models;
  RetryPolicy retry;
  // Task definitions for tcp environments (JSONL, see TaskRegistry::read_jsonl).
  std::optional<std::filesystem::path> tasks_file;
};

// Parses the JSON config format documented in the README. Relative paths are
// resolved against base_dir. Throws ValidationError on any problem.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything run_grid needs, built from a config.
struct Harness {
  std::shared_ptr<ModelGateway> gateway;
  TaskRegistry registry;
  EnvironmentFactory environments;
  std::vector<std::string> secrets;
};

Harness build_harness(const ExperimentConfig& config);

}  // namespace planahead
