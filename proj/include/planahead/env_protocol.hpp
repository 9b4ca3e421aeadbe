#pragma once

#include "planahead/error.hpp"
#include "planahead/media.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace planahead {

class LineChannel;

inline constexpr int kProtocolVersion = 1;

struct Observation {
  std::optional<ImagePart> screenshot;
  std::optional<std::string> axtree;
  std::optional<std::string> html;
  std::string url;
  std::size_t step_index = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Error codes shared by every environment and the wire protocol.
namespace protocol_code {
inline constexpr std::string_view kBadMessage = "bad-message";
inline constexpr std::string_view kBadVersion = "bad-version";
inline constexpr std::string_view kUnknownTask = "unknown-task";
inline constexpr std::string_view kNoEpisode = "no-episode";      // action before reset
inline constexpr std::string_view kEpisodeDone = "episode-done";  // action after done
inline constexpr std::string_view kUnexpectedKind = "unexpected-kind";
inline constexpr std::string_view kInvalidAction = "invalid-action";
inline constexpr std::string_view kTransport = "transport";
inline constexpr std::string_view kEnvError = "env-error";
}  // namespace protocol_code

class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, std::string detail)
      : Error(code + ": " + detail), code_(std::move(code)), detail_(std::move(detail)) {}
  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

namespace msg {
struct Reset {
  std::string task_id;
};
struct ObservationMsg {
  Observation observation;
};
struct Action {
  std::string action;
};
struct Result {
  int reward = 0;
  bool done = false;
};
struct ErrorMsg {
  std::string code;
  std::string detail;
};
struct DescribeActions {};
struct ActionSet {
  std::vector<std::string> actions;
};
}  // namespace msg

using AdapterMessage = std::variant<msg::Reset, msg::ObservationMsg, msg::Action, msg::Result, msg::ErrorMsg,
                                    msg::DescribeActions, msg::ActionSet>;

std::string_view kind_of(const AdapterMessage& message);

// One line of UTF-8 JSON without the trailing newline. Every message carries
// "v": 1 and a "kind" discriminator; images travel base64-encoded with their
// media type.
std::string encode_message(const AdapterMessage& message);

// Throws ProtocolError "bad-message" (or "bad-version") on malformed input.
AdapterMessage decode_message(std::string_view line);

// Throws ProtocolError "bad-message" unless one of screenshot/axtree/html is set.
void validate_observation(const Observation& observation);

// ---- environments ---------------------------------------------------------

struct StepResult {
  Observation observation;
  int reward = 0;
  bool done = false;
};

// The executor's view of a task environment. Out-of-order calls throw
// ProtocolError with one of the protocol_code values.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(const std::string& task_id) = 0;
  virtual StepResult step(const std::string& action) = 0;
  // Legal action templates such as "click(bid)"; never empty.
  virtual std::vector<std::string> describe_actions() = 0;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

// Name of an action string or template: the identifier before '('.
std::string action_name(std::string_view action);
bool action_in_set(std::string_view action, const std::vector<std::string>& templates);

// Serves one connection: decodes each line, drives the wrapped environment
// and answers. Reset answers with an observation; Action with an observation
// followed by a result; DescribeActions with an action set. Any failure is
// answered with an error message and the connection stays usable.
class ProtocolServer {
 public:
  explicit ProtocolServer(Environment& env);

  std::vector<std::string> handle(std::string_view line);
  // Loops until the peer closes the channel.
  void serve(LineChannel& channel);

 private:
  Environment& env_;
};

// Environment reached over a line channel (pipe, socketpair or TCP).
class RemoteEnvironment final : public Environment {
 public:
  explicit RemoteEnvironment(std::unique_ptr<LineChannel> channel);
  ~RemoteEnvironment() override;

  Observation reset(const std::string& task_id) override;
  StepResult step(const std::string& action) override;
  std::vector<std::string> describe_actions() override;

  // Sends a raw line and returns the next decoded reply. Used by the
  // conformance tester to probe malformed input.
  AdapterMessage exchange_raw(std::string_view line);

 private:
  AdapterMessage send(const AdapterMessage& message);
  AdapterMessage receive();

  std::unique_ptr<LineChannel> channel_;
};

}  // namespace planahead
