#include "planahead/plan_engine.hpp"

#include "planahead/prompt_corpus_data.hpp"

#include <fstream>
#include <sstream>

namespace planahead {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n";

std::string trimmed(std::string_view text) {
  const auto first = text.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kWhitespace);
  return std::string(text.substr(first, last - first + 1));
}

struct Span {
  std::size_t open = std::string_view::npos;  // position of the opening tag
  std::size_t body = 0;                       // first byte of the content
  std::size_t close = 0;                      // position of the closing tag
  std::size_t end = 0;                        // one past the closing tag
};

Span find_pair(std::string_view raw, std::string_view name, std::size_t from) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  Span span;
  const auto o = raw.find(open, from);
  if (o == std::string_view::npos) return span;
  const auto c = raw.find(close, o + open.size());
  if (c == std::string_view::npos) return span;
  return Span{o, o + open.size(), c, c + close.size()};
}

}  // namespace

std::string_view to_string(PlanRepresentation rep) {
  switch (rep) {
    case PlanRepresentation::SequentialSubgoals: return "sequential";
    case PlanRepresentation::Checklist: return "checklist";
    case PlanRepresentation::Pseudocode: return "pseudocode";
    case PlanRepresentation::Narrative: return "narrative";
  }
  return "sequential";
}

std::string_view display_name(PlanRepresentation rep) {
  switch (rep) {
    case PlanRepresentation::SequentialSubgoals: return "Sequential";
    case PlanRepresentation::Checklist: return "Checklist";
    case PlanRepresentation::Pseudocode: return "Pseudocode";
    case PlanRepresentation::Narrative: return "Narrative";
  }
  return "Sequential";
}

PlanRepresentation parse_representation(std::string_view name) {
  for (auto rep : kAllRepresentations) {
    if (name == to_string(rep) || name == display_name(rep)) return rep;
  }
  if (name == "sequential_subgoals") return PlanRepresentation::SequentialSubgoals;
  throw ValidationError("unknown plan representation '" + std::string(name) +
                        "' (expected sequential, checklist, pseudocode or narrative)");
}

std::string PromptTemplate::render_user(std::string_view goal) const {
  return fill_template(user_template, {{"goal", std::string(goal)}});
}

std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

const PromptCorpus& PromptCorpus::builtin() {
  static const PromptCorpus corpus = [] {
    PromptCorpus c;
    for (const auto& file : detail::builtin_corpus_files()) c.files_.emplace(file.path, file.text);
    return c;
  }();
  return corpus;
}

PromptCorpus PromptCorpus::load(const std::filesystem::path& dir) {
  PromptCorpus c;
  for (const auto& file : detail::builtin_corpus_files()) {
    std::ifstream in(dir / std::filesystem::path(file.path));
    if (!in) throw ValidationError("prompt corpus file missing: " + (dir / file.path).string());
    std::ostringstream text;
    text << in.rdbuf();
    c.files_.emplace(file.path, text.str());
  }
  return c;
}

const std::string& PromptCorpus::text(std::string_view path) const {
  auto it = files_.find(path);
  if (it == files_.end()) throw ValidationError("prompt corpus has no file " + std::string(path));
  return it->second;
}

std::string_view PromptCorpus::planner_file(PlanRepresentation rep) {
  switch (rep) {
    case PlanRepresentation::SequentialSubgoals: return "planner/sequential.txt";
    case PlanRepresentation::Checklist: return "planner/checklist.txt";
    case PlanRepresentation::Pseudocode: return "planner/pseudocode.txt";
    case PlanRepresentation::Narrative: return "planner/narrative.txt";
  }
  return "planner/sequential.txt";
}

PromptTemplate PromptCorpus::planner(PlanRepresentation rep) const {
  return PromptTemplate{rep, trimmed(text(planner_file(rep))), trimmed(text("planner/user.txt"))};
}

PromptTemplate build_planner_prompt(PlanRepresentation rep) { return PromptCorpus::builtin().planner(rep); }

PlanSections parse_planner_output(std::string_view raw) {
  const Span plan = find_pair(raw, "plan", 0);
  if (plan.open == std::string_view::npos) {
    const bool opened = raw.find("<plan>") != std::string_view::npos;
    throw ParseError(ParseError::Kind::MissingTag, "plan",
                     opened ? "planner output has an unclosed <plan> tag" : "planner output has no <plan> tag");
  }

  PlanSections out;
  out.plan = trimmed(raw.substr(plan.body, plan.close - plan.body));
  if (out.plan.empty()) throw ParseError(ParseError::Kind::EmptyPlan, "plan", "planner output has an empty plan");

  // Closest complete observation pair that ends before the plan opens.
  for (std::size_t from = 0;;) {
    const Span obs = find_pair(raw, "observation", from);
    if (obs.open == std::string_view::npos || obs.end > plan.open) break;
    out.observation = trimmed(raw.substr(obs.body, obs.close - obs.body));
    from = obs.end;
  }
  const Span thought = find_pair(raw, "thought", plan.end);
  if (thought.open != std::string_view::npos) {
    out.thought = trimmed(raw.substr(thought.body, thought.close - thought.body));
  }
  return out;
}

std::string render_planner_output(const PlanSections& s) {
  return "<observation>" + s.observation + "</observation>\n<plan>" + s.plan + "</plan>\n<thought>" + s.thought +
         "</thought>";
}

ChatRequest make_planner_request(const PromptCorpus& corpus, const std::string& model_id,
                                 const PlannerRequest& request) {
  if (request.goal.empty()) throw ValidationError("planner request needs a goal");
  if (request.screenshot.empty()) throw ValidationError("planner request needs a screenshot");
  const auto prompt = corpus.planner(request.representation);
  ChatRequest chat;
  chat.model_id = model_id;
  chat.temperature = request.temperature;
  chat.seed = request.seed;
  chat.messages.push_back({Role::System, {prompt.system_text}});
  chat.messages.push_back({Role::User, {prompt.render_user(request.goal), request.screenshot}});
  return chat;
}

Plan generate_plan(ChatClient& client, const std::string& model_id, const PlannerRequest& request,
                   std::size_t retry_budget, std::string_view tag_prefix, const PromptCorpus& corpus) {
  ChatRequest chat = make_planner_request(corpus, model_id, request);
  TokenUsage usage;
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= retry_budget + 1; ++attempt) {
    chat.request_tag = std::string(tag_prefix) + "-" + std::to_string(attempt);
    auto response = client.complete(chat);
    usage += response.usage;
    try {
      auto sections = parse_planner_output(response.text);
      Plan plan;
      plan.representation = request.representation;
      plan.observation_text = std::move(sections.observation);
      plan.plan_text = std::move(sections.plan);
      plan.thought_text = std::move(sections.thought);
      plan.raw_output = std::move(response.text);
      plan.planner_model_id = model_id;
      plan.retries = attempt - 1;
      plan.usage = usage;
      return plan;
    } catch (const ParseError& e) {
      last_error = e.what();
    }
  }
  throw PlanGenerationFailed("planner '" + model_id + "' gave no parseable plan in " +
                                 std::to_string(retry_budget + 1) + " calls: " + last_error,
                             retry_budget + 1);
}

}  // namespace planahead
