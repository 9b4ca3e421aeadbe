#pragma once

#include "planahead/error.hpp"
#include "planahead/media.hpp"
#include "planahead/model_gateway.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace planahead {

enum class PlanRepresentation { SequentialSubgoals, Checklist, Pseudocode, Narrative };

inline constexpr std::array<PlanRepresentation, 4> kAllRepresentations = {
    PlanRepresentation::SequentialSubgoals, PlanRepresentation::Checklist, PlanRepresentation::Pseudocode,
    PlanRepresentation::Narrative};

// "sequential", "checklist", "pseudocode", "narrative".
std::string_view to_string(PlanRepresentation rep);
std::string_view display_name(PlanRepresentation rep);  // "Sequential", "Checklist", ...
PlanRepresentation parse_representation(std::string_view name);

// Planner prompt for one representation. The goal goes into the user turn.
struct PromptTemplate {
  PlanRepresentation representation = PlanRepresentation::SequentialSubgoals;
  std::string system_text;
  std::string user_template;  // contains "{goal}"

  std::string render_user(std::string_view goal) const;
};

// Text templates keyed by their path under prompts/ (e.g. "planner/checklist.txt").
class PromptCorpus {
 public:
  static const PromptCorpus& builtin();
  // Loads the same file set from a directory laid out like prompts/.
  static PromptCorpus load(const std::filesystem::path& dir);

  const std::string& text(std::string_view path) const;
  PromptTemplate planner(PlanRepresentation rep) const;
  const std::map<std::string, std::string, std::less<>>& files() const { return files_; }

  static std::string_view planner_file(PlanRepresentation rep);

 private:
  std::map<std::string, std::string, std::less<>> files_;
};

// Replaces every "{key}" with its value; unknown placeholders are left alone.
std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values);

PromptTemplate build_planner_prompt(PlanRepresentation rep);

// ---- planner output -------------------------------------------------------

struct PlanSections {
  std::string observation;
  std::string plan;
  std::string thought;

  friend bool operator==(const PlanSections&, const PlanSections&) = default;
};

class ParseError : public Error {
 public:
  enum class Kind { MissingTag, EmptyPlan };
  ParseError(Kind kind, std::string tag, std::string message)
      : Error(std::move(message)), kind_(kind), tag_(std::move(tag)) {}
  Kind kind() const { return kind_; }
  const std::string& tag() const { return tag_; }

 private:
  Kind kind_;
  std::string tag_;
};

// Takes the first <plan>...</plan> pair, the closest complete observation
// pair before it and the first complete thought pair after it. Text outside
// the tags is ignored; section contents are trimmed. Tags are case-sensitive.
// Missing observation/thought sections come back empty.
PlanSections parse_planner_output(std::string_view raw);

std::string render_planner_output(const PlanSections& sections);

// ---- plan generation ------------------------------------------------------

struct PlannerRequest {
  PlanRepresentation representation = PlanRepresentation::SequentialSubgoals;
  std::string goal;
  ImagePart screenshot;
  double temperature = 0.6;
  std::optional<std::uint64_t> seed;
};

struct Plan {
  PlanRepresentation representation = PlanRepresentation::SequentialSubgoals;
  std::string observation_text;
  std::string plan_text;
  std::string thought_text;
  std::string raw_output;
  std::string planner_model_id;
  std::size_t retries = 0;  // re-requests after a parse error
  TokenUsage usage;
};

class PlanGenerationFailed : public Error {
 public:
  PlanGenerationFailed(std::string message, std::size_t calls) : Error(std::move(message)), calls_(calls) {}
  std::size_t calls() const { return calls_; }

 private:
  std::size_t calls_;
};

ChatRequest make_planner_request(const PromptCorpus& corpus, const std::string& model_id,
                                 const PlannerRequest& request);

// Asks the planner once and re-asks up to `retry_budget` times while the
// answer does not parse. Request tags are "<tag_prefix>-<attempt>" starting at 1.
// Gateway failures propagate unchanged.
Plan generate_plan(ChatClient& client, const std::string& model_id, const PlannerRequest& request,
                   std::size_t retry_budget = 2, std::string_view tag_prefix = "plan",
                   const PromptCorpus& corpus = PromptCorpus::builtin());

}  // namespace planahead
