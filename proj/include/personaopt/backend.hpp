#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "personaopt/errors.hpp"

namespace personaopt {

using json = nlohmann::json;

struct ChatRequest {
  std::string model_id;
  std::optional<std::string> system;
  std::string user;
  double temperature = 0.0;  // 0 means greedy decoding
  int max_tokens = 256;
  std::optional<std::uint64_t> seed_hint;

  bool deterministic() const { return temperature == 0.0; }
  // SHA-256 of the canonical JSON encoding of every field.
  std::string cache_key() const;

  bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { stop, length, content_filter, other };

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  Usage usage;
  bool cached = false;

  bool operator==(const ChatResponse&) const = default;
};

void to_json(json& j, const ChatRequest& request);
void from_json(const json& j, ChatRequest& request);
void to_json(json& j, const ChatResponse& response);
void from_json(const json& j, ChatResponse& response);
std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

// A chat-completion endpoint. Implementations must be safe to call from
// several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

using BackendPtr = std::shared_ptr<ChatBackend>;

struct BatchError {
  std::size_t index = 0;
  ErrorKind kind = ErrorKind::transport;
  std::string message;
};

// Exactly one of response / error is set.
struct BatchOutcome {
  std::optional<ChatResponse> response;
  std::optional<BatchError> error;

  bool ok() const { return response.has_value(); }
};

// Issues every request with at most max_in_flight outstanding at a time and
// returns outcomes in request order. A failing member never prevents the
// others from completing.
std::vector<BatchOutcome> complete_batch(ChatBackend& backend,
                                         std::span<const ChatRequest> requests,
                                         int max_in_flight);

// Throws the first member error (lowest index), re-raised with its index in
// the message.
void throw_first_error(std::span<const BatchOutcome> outcomes);

// Runs body(i) for i in [0, count) on up to max_parallel threads.
// Exceptions from body are collected; the first (by index) is rethrown after
// all work has finished.
void parallel_for(std::size_t count, int max_parallel,
                  const std::function<void(std::size_t)>& body);

}  // namespace personaopt
